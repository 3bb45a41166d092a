//! Few-shot prompt construction and completion parsing. With PLACE_LLM_URL set,
//! the query is also sent to that endpoint.
//!
//! cargo run --example llm_prompt

use spatial_place::parser::llm::{build_llm_prompt, examples_from_instructions, parse_llm_output, LlmClient};
use spatial_place::parser::Lexicon;

fn main() -> spatial_place::Result<()> {
    let lex = Lexicon::default();
    let examples = examples_from_instructions(
        ["put it behind the mug and left to the plate.", "put it to the middle of the table."],
        &lex,
    )?;
    let query = "set the cup down a bit past the laptop, on its far side";
    println!("{}", build_llm_prompt(&examples, query)?);

    let canned = "Here you go:\n(laptop | far side)\n";
    let offline = parse_llm_output(canned, &lex)?;
    println!("canned completion -> {:?} {:?}", offline.tuples, offline.relations);

    match LlmClient::from_env() {
        Ok(client) => {
            let live = client.parse(&examples, query, &lex)?;
            println!("live completion -> {:?} ({:?})", live.tuples, live.source);
        }
        Err(e) => println!("skipping live call: {e}"),
    }
    Ok(())
}
