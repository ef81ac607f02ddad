//! Renders one synthetic scene and its normalized Sobel edge map.
//!
//! `cargo run --example sobel_edges -- [out_dir]`

use boundary_seg::data::{generate_scene, SceneSpec};
use boundary_seg::imaging::pnm::{write_edge_map, write_ppm};
use boundary_seg::imaging::{build_edge_pyramid, sobel_edge};
use boundary_seg::rng::SplitMix64;
use boundary_seg::Result;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sobel_out".into());
    std::fs::create_dir_all(&out).ok();
    let scene = generate_scene(&SceneSpec::default(), &mut SplitMix64::new(3), "scene")?;
    let edges = sobel_edge(&scene.image);
    println!("edge range [0, {:.3}]", edges.max());

    write_ppm(format!("{out}/scene.ppm"), &scene.image)?;
    write_edge_map(format!("{out}/edges.pgm"), &edges)?;
    for (l, e) in build_edge_pyramid(&edges, &[(16, 16), (8, 8), (4, 4)])?
        .iter()
        .enumerate()
    {
        println!(
            "level {} edge target {}x{}, max {:.3}",
            l + 1,
            e.height(),
            e.width(),
            e.max()
        );
    }
    println!("wrote {out}/scene.ppm and {out}/edges.pgm");
    Ok(())
}
