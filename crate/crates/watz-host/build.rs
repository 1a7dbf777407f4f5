//! Compiles the checked-in WebAssembly text fixtures to binaries so the
//! repository stays self-contained.

use std::path::Path;

fn main() {
    println!("cargo:rerun-if-changed=fixtures");
    let out_dir = std::env::var("OUT_DIR").unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for entry in std::fs::read_dir(&fixtures).expect("fixtures directory") {
        let path = entry.expect("fixture entry").path();
        if path.extension().and_then(|e| e.to_str()) != Some("wat") {
            continue;
        }
        let wasm = wat::parse_file(&path)
            .unwrap_or_else(|err| panic!("compiling {}: {err}", path.display()));
        let name = path.file_stem().unwrap().to_str().unwrap();
        std::fs::write(Path::new(&out_dir).join(format!("{name}.wasm")), wasm)
            .expect("write compiled fixture");
    }
}
