use std::env;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(format!("{}/include/lazymont.h", crate_dir));
        }
        Err(e) => {
            // a broken header generation should not block `cargo build` of the
            // workspace; the committed header stays in place
            println!("cargo:warning=cbindgen failed: {}", e);
        }
    }
}
