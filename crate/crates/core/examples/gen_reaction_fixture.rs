//! Regenerate `fixtures/reactions_100.tsv`.
//!
//! cargo run -p mhnpath --example gen_reaction_fixture

#[path = "../tests/common/reactions.rs"]
mod reactions;

fn main() -> std::io::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/reactions_100.tsv");
    std::fs::write(&path, reactions::reaction_fixture())?;
    println!("wrote {}", path.display());
    Ok(())
}
