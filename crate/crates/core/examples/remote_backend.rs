//! Talk to a running model server: print its manifest and verify one answer.
//!
//!     cargo run --example remote_backend -- http://localhost:8000

use qaverify::backend::{BackendSpec, ConvertBackend, HttpBackend, NliBackend};
use qaverify::{nli, qconvert};

fn main() -> qaverify::Result<()> {
    let Some(arg) = std::env::args().nth(1) else {
        eprintln!("usage: remote_backend <url>");
        std::process::exit(2);
    };
    let BackendSpec::Http(url) = arg.parse::<BackendSpec>()? else {
        eprintln!("expected an http URL");
        std::process::exit(2);
    };
    let server = HttpBackend::new(&url)?;
    for m in server.manifest()? {
        println!("{:?}  {}  {}", m.task, m.backend_id, m.checkpoint);
    }
    let q = "who plays michael on the good place";
    let hyp = qconvert::convert_neural(q, "Ted Danson", &server)?;
    let score = nli::score("The series stars Ted Danson as Michael.", &hyp.text, &server)?;
    println!("{} -> p_entail {:.3} ({})", hyp.text, score.p_entail, ConvertBackend::backend_id(&server));
    let _ = NliBackend::backend_id(&server);
    Ok(())
}
