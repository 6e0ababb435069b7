//! Provenance headers and artifact writing.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{Failure, Format};

/// Identifies the run that produced an artifact. The digest covers the
/// command line as parsed and the bytes of every input file.
pub struct Provenance {
    pub digest: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(manifest: &str, inputs: &[Vec<u8>], seed: Option<u64>) -> Self {
        let mut h = Sha256::new();
        h.update(manifest.as_bytes());
        for bytes in inputs {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        let digest = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Provenance { digest, seed }
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".into(), |s| s.to_string())
    }

    pub fn tsv_header(&self) -> String {
        format!(
            "# actlang {}\n# manifest sha256:{}\n# seed {}\n",
            env!("CARGO_PKG_VERSION"),
            self.digest,
            self.seed_text()
        )
    }

    pub fn json(&self) -> Value {
        json!({
            "tool": format!("actlang {}", env!("CARGO_PKG_VERSION")),
            "manifest_sha256": self.digest,
            "seed": self.seed,
        })
    }
}

/// Write `tsv` or `data` according to `format`, to `out` or stdout.
pub fn emit(
    prov: &Provenance,
    format: Format,
    out: Option<&Path>,
    tsv: impl FnOnce() -> String,
    data: impl FnOnce() -> Value,
) -> Result<(), Failure> {
    let text = match format {
        Format::Tsv => prov.tsv_header() + &tsv(),
        Format::Struct => {
            let doc = json!({ "provenance": prov.json(), "data": data() });
            serde_json::to_string_pretty(&doc).map_err(|e| Failure::internal(e.to_string()))? + "\n"
        }
    };
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::internal(format!("writing output: {e}")))
        }
    }
}

/// Body of a structured artifact, unwrapping the provenance envelope.
pub fn unwrap_data(v: Value) -> Value {
    match v {
        Value::Object(mut m) if m.contains_key("provenance") && m.contains_key("data") => {
            m.remove("data").unwrap()
        }
        v => v,
    }
}

/// `f64` in its shortest round-trip form.
pub fn num(x: f64) -> String {
    format!("{x}")
}
