//! A small bias/coverage study on size-50 subsamples of the EST library.
//!
//! ```bash
//! cargo run -p gnbp --example table1_desk
//! ```

use gnbp::cli::{cmd_reproduce_table1, Table1Args};

fn main() -> gnbp::Result<()> {
    let args = Table1Args {
        replicates: 4,
        modes: vec!["a=-1".into(), "a=0".into(), "a<1".into()],
        ..Default::default()
    };
    let table = cmd_reproduce_table1(&args)?;
    println!("target {:.5}", table.target);
    print!("{}", table.to_csv());
    Ok(())
}
