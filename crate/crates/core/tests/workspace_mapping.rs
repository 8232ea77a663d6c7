mod common;

use std::sync::Arc;

use depthtouch_core::workspace::{DEFAULT_ROI_NODES, DEFAULT_WORKSPACE_MM};
use depthtouch_core::{
    build_pyramid, select_roi, DepthField, DepthPyramid, Engine, RenderParams, RoiSelection, Vec3, WorkspaceMapping,
};
use rand::Rng;

fn ramp_pyramid(n: usize, spacing: f64, levels: usize) -> Arc<DepthPyramid<f64>> {
    let f = DepthField::from_fn(n, n, spacing, |x, y| 5.0 + 0.3 * x - 0.1 * y).unwrap();
    Arc::new(build_pyramid(&f, levels).unwrap())
}

#[test]
fn affine_map_arithmetic() {
    let m = WorkspaceMapping {
        workspace_extent: 101.6,
        lateral_scale: 2.0,
        depth_gain: 2.0,
        origin_x: 10.0,
        origin_y: 10.0,
    };
    assert_eq!(m.model_to_workspace(Vec3::new(12.0, 15.0, 3.0)), Vec3::new(4.0, 10.0, 6.0));
}

#[test]
fn round_trips_are_identity() {
    let p = ramp_pyramid(101, 0.7, 3);
    let sel = RoiSelection { level: 1, x: 7, y: 11, w: 23, h: 17 };
    let (_, m) = select_roi(&p, &sel, DEFAULT_WORKSPACE_MM).unwrap();
    let mut r = common::rng(5);
    for _ in 0..1000 {
        let q = Vec3::new(r.gen_range(0.0..70.0), r.gen_range(0.0..70.0), r.gen_range(-10.0..40.0));
        let back = m.workspace_to_model(m.model_to_workspace(q));
        assert!(back.distance(q) <= 1e-9, "{q:?} -> {back:?}");
    }
}

#[test]
fn window_corners_map_to_workspace_corners() {
    let p = ramp_pyramid(101, 0.5, 2);
    let sel = RoiSelection { level: 0, x: 20, y: 30, w: 41, h: 41 };
    let (local, m) = select_roi(&p, &sel, DEFAULT_WORKSPACE_MM).unwrap();
    let ws = m.to_workspace_field(&local).unwrap();
    let corner = Vec3::new(ws.extent_x(), ws.extent_y(), 0.0);
    let back = m.workspace_to_model(corner);
    assert!((back.x - 60.0 * 0.5).abs() < 1e-12 && (back.y - 70.0 * 0.5).abs() < 1e-12);
    assert_eq!(m.workspace_to_model(Vec3::zero()), Vec3::new(10.0, 15.0, 0.0));
}

#[test]
fn larger_side_fills_the_cube() {
    let p = ramp_pyramid(301, 1.0, 3);
    for sel in [
        RoiSelection { level: 0, x: 0, y: 0, w: 200, h: 200 },
        RoiSelection { level: 0, x: 13, y: 40, w: 90, h: 31 },
        RoiSelection { level: 1, x: 3, y: 4, w: 12, h: 77 },
        RoiSelection::full(&p, 2).unwrap(),
    ] {
        let (local, m) = select_roi(&p, &sel, DEFAULT_WORKSPACE_MM).unwrap();
        let ws = m.to_workspace_field(&local).unwrap();
        let side = ws.extent_x().max(ws.extent_y());
        assert!((side - DEFAULT_WORKSPACE_MM).abs() <= 4.0 * f64::EPSILON * DEFAULT_WORKSPACE_MM, "{sel:?}: {side}");
        assert_eq!(m.depth_gain, m.lateral_scale);
    }
}

#[test]
fn two_hundred_nodes_at_one_mm() {
    let p = ramp_pyramid(301, 1.0, 1);
    let sel = RoiSelection { level: 0, x: 50, y: 50, w: 200, h: 200 };
    let (local, m) = select_roi(&p, &sel, DEFAULT_WORKSPACE_MM).unwrap();
    assert_eq!((local.width(), local.height()), (200, 200));
    assert!((m.lateral_scale - 101.6 / 199.0).abs() < 1e-12);
    assert!((m.lateral_scale - 0.5106).abs() < 1e-4);
}

#[test]
fn quarter_window_doubles_scale() {
    let p = ramp_pyramid(201, 1.0, 2);
    let full = RoiSelection::full(&p, 0).unwrap();
    let quarter = RoiSelection { level: 0, x: 50, y: 50, w: 101, h: 101 };
    let (_, a) = select_roi(&p, &full, DEFAULT_WORKSPACE_MM).unwrap();
    let (_, b) = select_roi(&p, &quarter, DEFAULT_WORKSPACE_MM).unwrap();
    assert!((b.lateral_scale / a.lateral_scale - 2.0).abs() < 1e-12);
}

#[test]
fn zoom_preserves_slopes() {
    let p = ramp_pyramid(201, 0.5, 3);
    let model = p.level(0).unwrap().surface_normal(30.0, 30.0).unwrap();
    for sel in [RoiSelection { level: 0, x: 40, y: 40, w: 60, h: 60 }, RoiSelection::full(&p, 2).unwrap()] {
        let (local, m) = select_roi(&p, &sel, DEFAULT_WORKSPACE_MM).unwrap();
        let ws = m.to_workspace_field(&local).unwrap();
        let n = ws.surface_normal(ws.extent_x() / 3.0, ws.extent_y() / 2.0).unwrap();
        assert!(n.angle_to(model) < 1e-9, "{sel:?}");
    }
}

#[test]
fn out_of_bounds_windows_are_rejected() {
    let p = ramp_pyramid(65, 1.0, 3);
    for sel in [
        RoiSelection { level: 3, x: 0, y: 0, w: 2, h: 2 },
        RoiSelection { level: 0, x: 60, y: 0, w: 6, h: 6 },
        RoiSelection { level: 0, x: 0, y: 0, w: 1, h: 9 },
    ] {
        assert!(select_roi(&p, &sel, DEFAULT_WORKSPACE_MM).is_err(), "{sel:?}");
    }
}

#[test]
fn level_steps_respect_bounds() {
    let p = ramp_pyramid(129, 1.0, 3);
    let top = RoiSelection::full(&p, 2).unwrap();
    assert!(top.step_level(&p, 1).is_err());
    let fine = RoiSelection { level: 0, x: 0, y: 0, w: 20, h: 20 };
    assert!(fine.step_level(&p, -1).is_err());
    let coarser = fine.step_level(&p, 1).unwrap();
    assert_eq!(coarser.level, 1);
    coarser.validate(&p).unwrap();
}

fn engine(p: &Arc<DepthPyramid<f64>>, sel: RoiSelection) -> Engine<f64> {
    Engine::new(p.clone(), sel, RenderParams::default(), DEFAULT_WORKSPACE_MM).unwrap()
}

#[test]
fn engine_starts_parked_above_window() {
    let p = ramp_pyramid(129, 1.0, 3);
    let e = engine(&p, RoiSelection::full(&p, 1).unwrap());
    let s = e.state();
    assert!(!s.in_contact && s.force == Vec3::zero());
    let top = e.field().max_value();
    assert!((s.hip.z - (top + 0.1 * DEFAULT_WORKSPACE_MM)).abs() < 1e-9);
    assert!((s.hip.x - e.field().extent_x() / 2.0).abs() < 1e-9);
}

#[test]
fn switching_to_same_roi_keeps_geometry() {
    let p = ramp_pyramid(129, 1.0, 3);
    let sel = RoiSelection { level: 0, x: 10, y: 10, w: 64, h: 64 };
    let mut e = engine(&p, sel);
    let hip = Vec3::new(40.0, 50.0, e.field().sample_depth(40.0, 50.0).unwrap() - 1.0);
    for _ in 0..20 {
        e.tick(hip).unwrap();
    }
    assert!(e.state().in_contact);
    let before = (e.field().clone(), *e.mapping(), e.mapping_version());
    e.switch_roi(sel).unwrap();
    assert_eq!(*e.field().as_ref(), *before.0);
    assert_eq!(*e.mapping(), before.1);
    assert_eq!(e.mapping_version(), before.2 + 1);
    let s = e.state();
    assert!(s.hip.distance(hip) < 1e-9);
    assert!(!s.in_contact && s.force == Vec3::zero());
    assert!(s.proxy.z >= e.field().sample_depth(s.proxy.x, s.proxy.y).unwrap());
}

#[test]
fn zoom_in_on_contact_keeps_model_position() {
    let p = ramp_pyramid(257, 0.5, 3);
    let mut e = engine(&p, RoiSelection::full(&p, 2).unwrap());
    let hip = Vec3::new(50.0, 50.0, 1.0);
    for _ in 0..10 {
        e.tick(hip).unwrap();
    }
    let model = e.mapping().workspace_to_model(e.state().hip);
    let sel = RoiSelection::centered(&p, 0, model.x, model.y, 60, 60).unwrap();
    e.switch_roi(sel).unwrap();
    let back = e.mapping().workspace_to_model(e.state().hip);
    assert!(back.distance(model) < 1e-9);
    assert_eq!(e.state().force, Vec3::zero());
    let hip = e.state().hip;
    let below = e.field().sample_depth(hip.x, hip.y).unwrap() - 0.5;
    assert!(e.tick(Vec3::new(hip.x, hip.y, below)).unwrap().state.in_contact);
}

#[test]
fn hip_outside_new_window_is_parked() {
    let p = ramp_pyramid(129, 1.0, 2);
    let mut e = engine(&p, RoiSelection::full(&p, 0).unwrap());
    e.tick(Vec3::new(5.0, 5.0, 80.0)).unwrap();
    e.switch_roi(RoiSelection { level: 0, x: 80, y: 80, w: 40, h: 40 }).unwrap();
    assert_eq!(e.state().hip, e.park_point());
}

#[test]
fn invalid_switch_keeps_previous_roi() {
    let p = ramp_pyramid(129, 1.0, 2);
    let sel = RoiSelection { level: 0, x: 0, y: 0, w: 50, h: 50 };
    let mut e = engine(&p, sel);
    let v = e.mapping_version();
    assert!(e.switch_roi(RoiSelection { level: 5, x: 0, y: 0, w: 2, h: 2 }).is_err());
    assert_eq!(e.roi(), sel);
    assert_eq!(e.mapping_version(), v);
}

#[test]
fn switch_on_800_level_fits_between_ticks() {
    let f = DepthField::from_fn(800, 800, 0.127, |x: f64, y: f64| (x * 0.2).sin() + 0.05 * y).unwrap();
    let p = Arc::new(build_pyramid(&f, 3).unwrap());
    let mut e = engine(&p, RoiSelection::full(&p, 2).unwrap());
    let mut times = Vec::new();
    for k in 0..5 {
        let sel = RoiSelection { level: 0, x: 100 * k, y: 50 * k, w: DEFAULT_ROI_NODES, h: DEFAULT_ROI_NODES };
        e.switch_roi(sel).unwrap();
        times.push(e.last_switch().unwrap().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    assert!(times[2] < 1e-3, "{times:?}");
}
