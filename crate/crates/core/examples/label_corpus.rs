//! Converts a marked-up corpus source into JSONL.
//!
//! cargo run -p evobase-core --example label_corpus -- fixtures/fixture_corpus.src.txt fixtures/fixture_corpus.jsonl

use std::fs::File;
use std::io::BufWriter;
use std::process::ExitCode;

use evobase_core::markup::parse_corpus;
use evobase_core::textseg::Lexicon;
use evobase_core::training::write_corpus;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [src, out] = args.as_slice() else {
        eprintln!("usage: label_corpus <source.txt> <out.jsonl>");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(src) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{src}: {e}");
            return ExitCode::FAILURE;
        }
    };
    let corpus = match parse_corpus(&text, Lexicon::bundled()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::FAILURE;
        }
    };
    let positives: usize = corpus.iter().map(|a| a.positives.len()).sum();
    let written = File::create(out).map_err(|e| e.to_string()).and_then(|f| {
        write_corpus(BufWriter::new(f), &corpus).map_err(|e| e.to_string())
    });
    if let Err(e) = written {
        eprintln!("{out}: {e}");
        return ExitCode::FAILURE;
    }
    println!("{} articles, {positives} positives", corpus.len());
    ExitCode::SUCCESS
}
