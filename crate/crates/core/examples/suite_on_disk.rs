//! Writes a small phantom suite, then reads it back the way the command line
//! does. Pass a directory to keep the files; otherwise a temporary one is used.

use std::path::PathBuf;

use ea_refine::formats::{list_frames, read_grid, read_layers, read_pgm};
use ea_refine::phantom::{generate_suite, read_manifest, Issue, PhantomSpec, Schedule};

fn main() -> ea_refine::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ea-refine-suite"));
    let spec = PhantomSpec {
        seed: 3,
        shift_at: Some(4),
        ..PhantomSpec::default()
    }
    .with_issues([Issue::TopUndershoot, Issue::DxSkew]);
    let manifest_path = generate_suite(&spec, 6, Schedule::Alternate, &dir)?;
    let manifest = read_manifest(&manifest_path)?;
    for f in &manifest.frames {
        let flags: Vec<String> = f.flags.iter().map(ToString::to_string).collect();
        println!(
            "{:03} shifted={:<5} span={:?} flags=[{}]",
            f.index,
            f.shifted,
            f.span,
            flags.join(", ")
        );
    }
    let first = &list_frames(&dir)?[0];
    let image = read_grid(&first.image)?;
    let (ilm, bm) = read_layers(&first.layers)?;
    let gt = read_pgm(first.gt.as_ref().expect("suite writes ground truth"))?;
    println!(
        "frame {}: {}x{} image, {} layer columns, {} lesion pixels, ilm[0]={:.2}, bm[0]={:.2}",
        first.id,
        image.height(),
        image.width(),
        ilm.width(),
        gt.count(),
        ilm.row(0),
        bm.row(0)
    );
    println!("manifest: {}", manifest_path.display());
    Ok(())
}
