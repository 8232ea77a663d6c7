//! Regenerates the trajectory and field fixtures under `crates/core/fixtures`.
//!
//! cargo run -p depthtouch-core --example write_fixtures

use std::path::Path;

use depthtouch_core::fixtures::{self, Surface};
use depthtouch_core::io::{save_depth_grid, write_trajectory};
use depthtouch_core::GridFormat;

fn main() -> depthtouch_core::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    write_trajectory(&fixtures::free_space::<f64>(), &dir.join("free_space.csv"))?;
    write_trajectory(&fixtures::descend_hold::<f64>(), &dir.join("descend_hold.csv"))?;
    write_trajectory(&fixtures::curved_slide::<f64>(), &dir.join("curved_slide.csv"))?;
    write_trajectory(&fixtures::contact_heavy::<f64>(10_000), &dir.join("contact_heavy.csv"))?;
    for s in [Surface::Flat, Surface::Paraboloid, Surface::Holed] {
        save_depth_grid(&s.sample::<f64>(101)?, &dir.join(format!("{}_101.mhdf", s.name())), GridFormat::Mhdf)?;
    }
    Ok(())
}
