// Embeds every file under presets/ so `--preset <name>` works from any
// working directory.
use std::env;
use std::fs;
use std::path::Path;

fn main() {
    let dir = Path::new("presets");
    println!("cargo:rerun-if-changed=presets");
    let mut names: Vec<String> = fs::read_dir(dir)
        .expect("presets directory")
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".toml"))
        .collect();
    names.sort();
    let mut out = String::from("pub static PRESETS: &[(&str, &str)] = &[\n");
    for n in &names {
        let stem = n.trim_end_matches(".toml");
        let path = fs::canonicalize(dir.join(n)).unwrap();
        out.push_str(&format!(
            "    ({stem:?}, include_str!({:?})),\n",
            path.display().to_string()
        ));
    }
    out.push_str("];\n");
    fs::write(Path::new(&env::var("OUT_DIR").unwrap()).join("presets.rs"), out).unwrap();
}
