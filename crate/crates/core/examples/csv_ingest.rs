//! Reading a numeric CSV, standardizing it and writing it back.
//!
//! Run with `cargo run --example csv_ingest`.

use htkmeans::prelude::*;

fn main() -> Result<()> {
    let text = "height,weight,batch\n1.62,55.0,1\n1.80,81.5,1\n1.75,70.2,1\n1.58,49.9,1\n";
    let raw = read_csv(text.as_bytes(), true)?;
    println!("read {} x {} with columns {:?}", raw.n_obs(), raw.n_vars(), raw.column_names());

    // The constant `batch` column carries no information and is dropped.
    let st = standardize(&raw)?;
    println!("dropped: {:?}", st.dropped);
    let mut out = Vec::new();
    write_csv(&st.data, &mut out)?;
    print!("{}", String::from_utf8(out).expect("utf-8"));

    match read_csv("a,b\n1,2\n3,x\n".as_bytes(), true) {
        Err(e) => println!("bad cell: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
