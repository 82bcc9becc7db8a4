//! Prompt and token savings for a few removal counts.

use lfrefine::eval::{prompts_saved, tokens_saved, SavingsReport};

fn main() -> lfrefine::Result<()> {
    for (m_r, n) in [(1, 1586), (3, 22254), (6, 22254)] {
        let report = SavingsReport {
            m_r,
            n,
            prompts_saved: prompts_saved(m_r, n),
            tokens_saved: None,
        };
        print!("{}", report.to_markdown());
        println!();
    }
    let per_lf = [44.7, 44.2, 45.1];
    println!(
        "tokens saved removing LF 0 on 1586 examples: {:.1}",
        tokens_saved(&[0], &per_lf, 1586)?
    );
    Ok(())
}
