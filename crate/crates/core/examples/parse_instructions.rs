//! Split instructions into (reference | relation) tuples with the grammar parser.
//!
//! cargo run --example parse_instructions -- "put it behind the mug."

use spatial_place::parser::{parse_instruction, Lexicon};

const DEFAULTS: [&str; 4] = [
    "put it to the top left corner of the table.",
    "put it behind the mug and left to the black and blue sneakers.",
    "could you please drop the thing to the right rear corner of the spiderman figure.",
    "place it somewhere nice.",
];

fn main() {
    let lex = Lexicon::default();
    let given: Vec<String> = std::env::args().skip(1).collect();
    let inputs: Vec<&str> = if given.is_empty() { DEFAULTS.to_vec() } else { given.iter().map(String::as_str).collect() };
    for text in inputs {
        println!("{text}");
        match parse_instruction(text, &lex) {
            Ok(p) => {
                for (t, rel) in p.tuples.iter().zip(&p.relations) {
                    let canonical = rel.map_or("?".to_string(), |r| r.to_string());
                    println!("  ({} | {})  -> {canonical}", t.ref_expr(), t.rel_expr());
                }
            }
            Err(e) => println!("  {e}"),
        }
    }
}
