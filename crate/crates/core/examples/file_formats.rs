//! Matrix, label and report files as used by the command-line tool.

use coke::io::{read_labels, read_matrix, read_report, write_labels, write_matrix, write_report, Record};

fn main() -> coke::Result<()> {
    let dir = std::env::temp_dir().join("coke-file-formats");
    std::fs::create_dir_all(&dir)?;

    let rows = vec![vec![1.0, 0.5, -0.25], vec![0.0, 2.0, 8.0]];
    write_matrix(dir.join("x.bin"), &rows)?;
    let back = read_matrix(dir.join("x.bin"))?;
    println!("matrix {}x{} round-trips: {}", back.len(), back[0].len(), back == rows);

    write_labels(dir.join("y.csv"), &[2, 0, 1])?;
    println!("labels file:\n{}", std::fs::read_to_string(dir.join("y.csv"))?);
    println!("labels parsed {:?}", read_labels(dir.join("y.csv"))?);

    let records = vec![
        Record::new("config").with("k_heads", "10,20").with("seed", 3),
        Record::new("epoch").with("epoch", 1).with("min_count", 41).with("label_churn", 0.25),
    ];
    write_report(dir.join("r.txt"), &records)?;
    print!("report file:\n{}", std::fs::read_to_string(dir.join("r.txt"))?);
    let parsed = read_report(dir.join("r.txt"))?;
    println!("churn from report: {:?}", parsed[1].get_f64("label_churn"));
    Ok(())
}
