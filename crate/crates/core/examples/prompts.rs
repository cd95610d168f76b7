//! Prints the prompt each strategy sends for a section.
//!
//! cargo run --example prompts

use pcaot::backends::{render_prompt, PromptStrategy};

fn main() {
    let code = "for (int i = 0; i < N; i++)\n    sum += a[i] * a[i];";
    for strategy in PromptStrategy::ALL {
        println!("== {strategy} ==\n{}\n", render_prompt(strategy, code));
    }
}
