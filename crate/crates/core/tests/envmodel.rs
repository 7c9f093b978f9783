mod common;

use std::fs;

use ccplan::envmodel::{self, Cell, Haven, OperationalBounds, Scenario, SynthSpec, TerrainGrid};
use ccplan::error::Error;
use ccplan::roverdyn::RoverState;
use common::*;

fn small_spec() -> SynthSpec {
    let mut spec = SynthSpec::medium();
    spec.n_frames = 12;
    spec.operational.t_max = 11.0 * 3600.0;
    for h in &mut spec.havens {
        h.deadline = spec.operational.t_max;
    }
    spec
}

#[test]
fn generator_is_deterministic() {
    let spec = small_spec();
    let a = envmodel::generate_synthetic(&spec, 3).unwrap();
    let b = envmodel::generate_synthetic(&spec, 3).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    assert_eq!(a.terrain().elevations(), b.terrain().elevations());
    let c = envmodel::generate_synthetic(&spec, 4).unwrap();
    assert_ne!(a.content_hash(), c.content_hash());
}

#[test]
fn crater_floor_stays_dark() {
    let spec = small_spec();
    let s = envmodel::generate_synthetic(&spec, 3).unwrap();
    let (cx, cy) = spec.crater_center;
    let floor = Cell::new(cx.round() as u32, cy.round() as u32);
    assert!(s.shadowed_cells().contains(&floor));
    assert_eq!(s.terrain().width(), 32);
    assert_eq!(s.terrain().slopes().len(), 32 * 32);
}

#[test]
fn manifest_round_trip_is_exact() {
    let s = envmodel::generate_synthetic(&small_spec(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = envmodel::save_scenario(&s, dir.path()).unwrap();
    let back = envmodel::load_scenario(&path).unwrap();
    assert_eq!(back.content_hash(), s.content_hash());
    assert_eq!(back.illumination().frames(), s.illumination().frames());
    let again = tempfile::tempdir().unwrap();
    envmodel::save_scenario(&back, again.path()).unwrap();
    for f in ["manifest.json", "elevation.f32", "illumination.f32"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(again.path().join(f)).unwrap()
        );
    }
}

#[test]
fn bright_frame_is_rejected_by_index() {
    let s = micro_a();
    let dir = tempfile::tempdir().unwrap();
    let path = envmodel::save_scenario(&s, dir.path()).unwrap();
    let mut frames = s.illumination().frames().to_vec();
    let cells = s.terrain().len();
    frames[5 * cells + 2] = 1.2;
    envmodel::write_raster(&dir.path().join("illumination.f32"), &frames).unwrap();
    match envmodel::load_scenario(&path) {
        Err(Error::FrameRange { frame, cell, .. }) => assert_eq!((frame, cell), (5, 2)),
        other => panic!("expected a frame range error, got {other:?}"),
    }
}

#[test]
fn missing_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        envmodel::load_scenario(dir.path().join("manifest.json")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn crop_keeps_local_content() {
    let s = micro_b();
    let op = *s.operational();
    let sub = s
        .crop(
            Cell::new(2, 0),
            2,
            3,
            op,
            RoverState::new(Cell::new(0, 1), 0.0, 400.0, 0),
        )
        .unwrap();
    assert_eq!((sub.terrain().width(), sub.terrain().height()), (2, 3));
    let cells: Vec<_> = sub.waypoints().iter().map(|w| w.cell).collect();
    assert_eq!(cells, vec![Cell::new(0, 0), Cell::new(1, 1)]);
    let havens: Vec<_> = sub.havens().iter().map(|h| h.cell).collect();
    assert_eq!(havens, vec![Cell::new(1, 2)]);
    for f in 0..s.illumination().n_frames() {
        for y in 0..3u32 {
            for x in 0..2u32 {
                let outer = s.terrain().index(Cell::new(x + 2, y));
                let inner = sub.terrain().index(Cell::new(x, y));
                assert_eq!(
                    sub.illumination().frame_value(f, inner),
                    s.illumination().frame_value(f, outer)
                );
            }
        }
    }
    assert!(s.crop(Cell::new(3, 0), 2, 3, op, *s.start()).is_err());
}

#[test]
fn validation_rejects_bad_scenarios() {
    let s = micro_a();
    let bad_start = RoverState::new(Cell::new(1, 1), 0.0, 50.0, 0);
    assert!(matches!(s.with_start(bad_start), Err(Error::InvalidScenario(_))));
    let op = OperationalBounds {
        t_min: 10.0,
        t_max: 10.0,
        ..*s.operational()
    };
    assert!(s.crop(Cell::new(0, 0), 3, 3, op, *s.start()).is_err());
    let flat = TerrainGrid::flat(3, 3, 90.0).unwrap();
    assert!(flat.slopes().iter().all(|&d| d == 0.0));
    assert!(flat.traversable_mask().iter().all(|&t| t));
}

#[test]
fn haven_lookup() {
    let s: Scenario = micro_b();
    let h: &Haven = s.haven_at(Cell::new(3, 2)).unwrap();
    assert_eq!(h.min_energy, 200.0);
    assert!(s.haven_at(Cell::new(1, 1)).is_none());
}
