//! Layer curve CSV with gaps, and the binary PGM mask format.

use std::path::Path;

use ea_refine::formats::{decode_layers, decode_pgm, encode_layers, encode_pgm};
use ea_refine::layers::{rasterize_band, validate_layers};

fn main() -> ea_refine::Result<()> {
    // columns 1 and 2 were not traced; they are interpolated on load
    let csv = "x,ilm_row,bm_row\n0,1,6\n1,,\n2,,7.5\n3,2.5,8\n4,2,8\n";
    let (ilm, bm) = decode_layers(csv, Path::new("inline.csv"))?;
    println!("ilm {:?}\nbm  {:?}", ilm.rows(), bm.rows());
    print!("{}", encode_layers(&ilm, &bm));

    let pair = validate_layers(ilm, bm, 10, 5)?;
    let band = rasterize_band(&pair, 1, 3, 10)?;
    let bytes = encode_pgm(&band);
    println!(
        "PGM: {} bytes, header {:?}",
        bytes.len(),
        String::from_utf8_lossy(&bytes[..11])
    );
    assert_eq!(decode_pgm(&bytes, Path::new("inline.pgm"))?, band);
    for y in 0..band.height() {
        let row: String = (0..band.width())
            .map(|x| if band.get(x, y) { '#' } else { '.' })
            .collect();
        println!("{row}");
    }
    Ok(())
}
