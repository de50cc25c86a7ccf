//! Packed codes, exact top-k Hamming search, and the PDHC file format.
//!
//! cargo run --example hamming_search

use pdh::codec::{read_codes, write_codes};
use pdh::{binarize, search_topk, CodeBook, CodeEntry, HashCode, PosteriorVector};

fn code(bits: &str) -> HashCode {
    HashCode::from_bits(&bits.chars().map(|c| c == '1').collect::<Vec<_>>())
}

fn main() -> pdh::Result<()> {
    let book = CodeBook::new(
        4,
        vec![
            CodeEntry { id: 10, label: 0, code: code("0000") },
            CodeEntry { id: 11, label: 1, code: code("1100") },
            CodeEntry { id: 12, label: 0, code: code("0001") },
            CodeEntry { id: 13, label: 2, code: code("1111") },
        ],
    )?;
    // posteriors threshold at 0.5; ties go to 1
    let query = binarize(&PosteriorVector(vec![0.2, 0.4, 0.1, 0.5]));
    println!("query bits {:?}", query.to_bits());
    for nb in search_topk(&book, &query, 3)? {
        println!("id {}  distance {}  label {}", nb.id, nb.distance, nb.label);
    }

    let mut bytes = Vec::new();
    write_codes(&mut bytes, &book)?;
    println!("PDHC: {} bytes, magic {:?}", bytes.len(), std::str::from_utf8(&bytes[..4]).unwrap());
    assert_eq!(read_codes(&mut bytes.as_slice())?, book);
    Ok(())
}
