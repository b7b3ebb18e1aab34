use cutout::synth::{generate, TileSynthConfig};
use skyquery_testkit::imaging;

#[test]
fn north_is_up() {
    println!("{}", imaging::north_up(20, 51).unwrap());
}

#[test]
fn overlay_markers_match_oracle() {
    println!("{}", imaging::overlay_positions(50, 52).unwrap());
}

#[test]
fn single_tile_identity() {
    println!("{}", imaging::single_tile_identity(53).unwrap());
}

#[test]
fn rendering_properties_on_synthetic_tiles() {
    let set = generate(&TileSynthConfig { cols: 3, rows: 3, stars: 60, ..Default::default() }).unwrap();
    println!("{}", imaging::rendering_properties(&set, 54).unwrap());
}
