//! Writes every figure's rate curves as CSV into a directory (default `figures/`).
use diqss::cli::{figure, FIGURES};

fn main() -> diqss::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "figures".into()));
    std::fs::create_dir_all(&dir)?;
    for id in FIGURES {
        let fig = figure(id)?;
        let path = dir.join(fig.file_name());
        fig.table()?.write_csv(std::fs::File::create(&path)?, &fig.comments)?;
        println!("{}", path.display());
    }
    Ok(())
}
