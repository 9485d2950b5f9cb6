//! Writes a small embedding file with some unknown labels, reads it back and
//! shows the error for a truncated file.

use myriad_al::format::{decode, encode, read_header, HEADER_LEN};
use myriad_al::{read_embedding_file, write_embedding_file, EmbeddingDataset};

fn main() -> myriad_al::Result<()> {
    let features = vec![0.1, 0.2, 0.3, 1.1, 1.2, 1.3, 2.1, 2.2, 2.3];
    let dataset = EmbeddingDataset::new(features, 3, vec![Some(0), None, Some(1)], 2)?;

    let dir = std::env::temp_dir().join("myriad-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("tiny.bin");
    write_embedding_file(&dataset, &path)?;

    let header = read_header(&path)?;
    println!("{header:?}");
    let back = read_embedding_file(&path)?;
    println!("labels read back: {:?}", back.labels());
    assert_eq!(back, dataset);

    let mut bytes = encode(&dataset);
    println!("{} bytes ({} header)", bytes.len(), HEADER_LEN);
    bytes.truncate(bytes.len() - 2);
    match decode(&bytes) {
        Ok(_) => println!("unexpectedly decoded"),
        Err(e) => println!("corrupt file: {e}"),
    }
    Ok(())
}
