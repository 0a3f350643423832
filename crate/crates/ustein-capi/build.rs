fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/ustein.h"));
        }
        Err(err) => {
            // keep the committed header usable when cbindgen cannot run
            println!("cargo:warning=cbindgen skipped: {err}");
        }
    }
}
