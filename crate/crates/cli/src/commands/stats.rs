use std::path::PathBuf;

use super::load_map;
use crate::error::CliResult;
use crate::Globals;

#[derive(Debug, Clone, Copy, Default, clap::ValueEnum)]
enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Map file.
    map: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

pub fn run(_globals: &Globals, args: Args) -> CliResult<()> {
    let map = load_map(&args.map)?;
    let stats = map.stats();
    let config = map.config();
    let histogram: Vec<String> = stats.depth_histogram.iter().map(usize::to_string).collect();
    match args.format {
        Format::Text => {
            println!("cell width        {} m", config.min_cell_width);
            println!("tree height       {}", config.tree_height);
            println!("extent            {} m", config.root_width());
            println!("allocated nodes   {}", stats.allocated_nodes);
            println!("coefficient bytes {}", stats.coefficient_bytes);
            println!("dense voxels      {}", stats.dense_voxel_count);
            println!("compression       {:.3}", stats.compression_ratio());
            println!("nodes per depth   {}", histogram.join(" "));
        }
        Format::Csv => {
            println!("min_cell_width_m,tree_height,allocated_nodes,coefficient_bytes,dense_voxels,compression_ratio,depth_histogram");
            println!(
                "{},{},{},{},{},{},{}",
                config.min_cell_width,
                config.tree_height,
                stats.allocated_nodes,
                stats.coefficient_bytes,
                stats.dense_voxel_count,
                stats.compression_ratio(),
                histogram.join(" ")
            );
        }
    }
    Ok(())
}
