use csdf::extraction::mesh_analytic;
use csdf::geometry::{surface_sample, AnalyticShape, TriangleMesh};
use csdf::metrics::{
    chamfer, chamfer_with, emd, evaluate_reconstruction, matching_cost, mean_and_median, mesh_accuracy, nearest_rank,
    ChamferMode, MetricProtocol,
};
use csdf::{rng, Point3};
use nalgebra::{Rotation3, Vector3};
use rand::Rng;

fn cloud(rng: &mut rng::Rng, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn brute_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let dir = |x: &[Point3], y: &[Point3]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    dir(a, b) + dir(b, a)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_emd(a: &[Point3], b: &[Point3]) -> f64 {
    permutations(a.len())
        .iter()
        .map(|perm| matching_cost(a, b, perm))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn chamfer_examples() {
    let a = vec![Point3::zeros()];
    let b = vec![Point3::new(1.0, 0.0, 0.0)];
    assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
    let mut rng = rng::seeded(1);
    let c = cloud(&mut rng, 50);
    assert_eq!(chamfer(&c, &c).unwrap(), 0.0);
    assert!(chamfer(&[], &c).is_err());
}

#[test]
fn chamfer_matches_double_loop() {
    let mut rng = rng::seeded(2);
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(1..=200), rng.random_range(1..=200));
        let a = cloud(&mut rng, na);
        let b = cloud(&mut rng, nb);
        assert_eq!(chamfer(&a, &b).unwrap(), brute_chamfer(&a, &b));
        assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
    }
}

#[test]
fn absolute_chamfer_is_available() {
    let a = vec![Point3::zeros()];
    let b = vec![Point3::new(2.0, 0.0, 0.0)];
    assert_eq!(chamfer_with(&a, &b, ChamferMode::Absolute).unwrap(), 4.0);
    assert_eq!(chamfer_with(&a, &b, ChamferMode::Squared).unwrap(), 8.0);
}

#[test]
fn emd_examples() {
    let mut rng = rng::seeded(3);
    let a = cloud(&mut rng, 20);
    assert_eq!(emd(&a, &a).unwrap(), 0.0);
    // Crossed pairing is cheaper.
    let a = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
    let b = vec![Point3::new(1.1, 0.0, 0.0), Point3::new(0.1, 0.0, 0.0)];
    let straight = matching_cost(&a, &b, &[0, 1]);
    let crossed = matching_cost(&a, &b, &[1, 0]);
    assert!(crossed < straight);
    assert_eq!(emd(&a, &b).unwrap(), crossed);
    assert!(emd(&a, &b[..1]).is_err());
}

#[test]
fn emd_matches_factorial_brute_force() {
    let mut rng = rng::seeded(4);
    for trial in 0..1000 {
        let n = 1 + trial % 6;
        let a = cloud(&mut rng, n);
        let b = cloud(&mut rng, n);
        let e = emd(&a, &b).unwrap();
        assert_eq!(e, brute_emd(&a, &b));
        // Lower bound by nearest neighbours.
        let nn = a
            .iter()
            .map(|p| b.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / n as f64;
        assert!(e >= nn - 1e-15);
    }
}

#[test]
fn mesh_accuracy_examples() {
    // Nine points on the surface and one far away: the 9th order statistic.
    let mut d = vec![0.0; 9];
    d.push(1.0);
    assert_eq!(nearest_rank(&mut d, 0.9), 0.0);

    let cube = TriangleMesh::cuboid(Point3::zeros(), Point3::repeat(0.5));
    let on = surface_sample(&cube, 1000, 5).unwrap();
    assert!(mesh_accuracy(&on, &cube).unwrap() <= 1e-9);
    assert!(mesh_accuracy(&on[..9], &cube).is_err());

    let sphere = TriangleMesh::icosphere(Point3::zeros(), 0.5, 5);
    let pts: Vec<Point3> = surface_sample(&sphere, 1000, 6)
        .unwrap()
        .into_iter()
        .map(|p| p.normalize() * 0.52)
        .collect();
    let acc = mesh_accuracy(&pts, &sphere).unwrap();
    assert!((acc - 0.02).abs() < 1e-3, "{acc}");
}

#[test]
fn mesh_accuracy_grows_with_outliers() {
    let cube = TriangleMesh::cuboid(Point3::zeros(), Point3::repeat(0.5));
    let mut rng = rng::seeded(7);
    let mut pts = cloud(&mut rng, 50);
    let mut previous = mesh_accuracy(&pts, &cube).unwrap();
    for k in 0..20 {
        pts.push(Point3::new(3.0 + k as f64, 0.0, 0.0));
        let now = mesh_accuracy(&pts, &cube).unwrap();
        assert!(now >= previous);
        previous = now;
    }
}

#[test]
fn metrics_are_rigid_invariant() {
    let mut rng = rng::seeded(8);
    let a = cloud(&mut rng, 60);
    let b = cloud(&mut rng, 60);
    let cube = TriangleMesh::cuboid(Point3::zeros(), Point3::repeat(0.4));
    for _ in 0..5 {
        let axis = Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1).normalize();
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rng.random_range(0.0..6.0));
        let t = Point3::new(0.3, -0.2, 0.5);
        let f = |p: &Point3| rot * p + t;
        let ra: Vec<Point3> = a.iter().map(f).collect();
        let rb: Vec<Point3> = b.iter().map(f).collect();
        assert!((chamfer(&a, &b).unwrap() - chamfer(&ra, &rb).unwrap()).abs() < 1e-9);
        assert!((emd(&a, &b).unwrap() - emd(&ra, &rb).unwrap()).abs() < 1e-9);
        let rcube = cube.map_vertices(f);
        assert!((mesh_accuracy(&a, &cube).unwrap() - mesh_accuracy(&ra, &rcube).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn reconstruction_record() {
    let mesh = mesh_analytic(&AnalyticShape::sphere(Point3::zeros(), 0.5), 48).unwrap();
    let protocol = MetricProtocol {
        cd_points: 5000,
        emd_points: 200,
        accuracy_points: 500,
        ..MetricProtocol::default()
    };
    let same = evaluate_reconstruction("s", &mesh, &mesh, &protocol).unwrap();
    assert_eq!(same.cd_mean_raw, 0.0);
    assert_eq!(same.cd_x1000, 0.0);
    let other = MetricProtocol {
        gt_seed: 99,
        ..protocol.clone()
    };
    let rec = evaluate_reconstruction("s", &mesh, &mesh, &other).unwrap();
    assert!(rec.cd_mean_raw > 0.0 && rec.emd > 0.0);
    assert_eq!(rec.cd_x1000, rec.cd_mean_raw * 1e3);
    assert_eq!(rec.mesh_acc_x10, rec.mesh_acc_raw * 10.0);
    assert!(evaluate_reconstruction("s", &TriangleMesh::empty(), &mesh, &protocol).is_err());
}

#[test]
fn chamfer_is_stable_under_resampling() {
    // The sampling floor of CD falls like 1/n (about 4e-5 between 30k and
    // 60k points on this torus), so the 10% bound holds once the surfaces
    // differ by CD ≈ 1e-3, the scale of a passable reconstruction.
    let gt = mesh_analytic(&AnalyticShape::torus(Point3::zeros(), 0.5, 0.2), 48).unwrap();
    let pred = gt.map_vertices(|v| v * 1.05);
    let cd = |n: usize| {
        chamfer(&surface_sample(&pred, n, 1).unwrap(), &surface_sample(&gt, n, 2).unwrap()).unwrap()
    };
    let (a, b) = (cd(30_000), cd(60_000));
    assert!((a - b).abs() / b < 0.1, "{a} vs {b}");
}

#[test]
fn mean_median() {
    assert_eq!(mean_and_median(&[3.0, 1.0, 2.0]), Some((2.0, 2.0)));
    assert_eq!(mean_and_median(&[1.0, 2.0, 3.0, 10.0]), Some((4.0, 2.5)));
    assert_eq!(mean_and_median(&[]), None);
}
