//! Paint a synthetic top-down raster, map object boxes to pixels and crop them.
//!
//! cargo run --example crop_raster -- [out_dir]

use std::path::PathBuf;

use image::Rgb;
use spatial_place::geometry::{Aabb, Vec2};
use spatial_place::raster::{crop_raster, write_ppm, Raster};
use spatial_place::scene::RasterRef;

fn main() -> spatial_place::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crops".into()));
    std::fs::create_dir_all(&out).map_err(|e| spatial_place::Error::io(&out, e))?;

    // 2 mm per pixel: the 1.0 x 0.6 m table becomes 500 x 300 px
    let raster_ref = RasterRef { path: out.join("scene.ppm"), meters_per_pixel: 0.002, origin_px: [250.0, 150.0] };
    let boxes = [
        ("mug", Aabb::from_extents(-0.3, -0.1, -0.22, -0.02), Rgb([200, 40, 40])),
        ("plate", Aabb::from_extents(0.05, 0.05, 0.17, 0.17), Rgb([40, 40, 200])),
    ];
    let mut img = Raster::from_pixel(500, 300, Rgb([235, 225, 205]));
    for (_, b, color) in &boxes {
        let r = raster_ref.rect_for(b);
        for v in r.v0..r.v1 {
            for u in r.u0..r.u1 {
                img.put_pixel(u, v, *color);
            }
        }
    }
    write_ppm(&img, &raster_ref.path)?;
    println!("table center at pixel {:?}", raster_ref.to_pixel(Vec2::new(0.0, 0.0)));

    for (name, b, _) in &boxes {
        let rect = raster_ref.rect_for(b);
        let crop = crop_raster(&img, rect)?;
        let path = out.join(format!("{name}.ppm"));
        write_ppm(&crop, &path)?;
        println!("{name}: pixels {:?}, crop {}x{} -> {}", <[u32; 4]>::from(rect), crop.width(), crop.height(), path.display());
    }
    Ok(())
}
