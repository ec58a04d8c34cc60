use isomlab_core::continuation::integrate_along_path;
use isomlab_core::fixtures::{generate_fixture, FixtureKind};
use isomlab_core::mat2;
use isomlab_core::path::ComplexPath;
use isomlab_core::{C64, Tolerances};

fn main() {
    let tol = Tolerances::default();
    let conn = generate_fixture(FixtureKind::IrregularM1N4, 1, &tol).unwrap();
    let c = |re: f64, im: f64| C64::new(re, im);
    for t in [1e-8, 1e-10, 1e-12] {
        let p = ComplexPath::open(vec![c(0.1, 2.6), c(2.9, 0.9), c(0.5, -2.7), c(-2.4, 0.4)]);
        let y0 = mat2::identity();
        let fwd = integrate_along_path(&conn, &p, &y0, t, &tol).unwrap().matrix;
        let back = integrate_along_path(&conn, &p.reversed(), &fwd, t, &tol).unwrap().matrix;
        let rev_res = mat2::norm(&(back - y0));
        let q = ComplexPath::open(vec![c(-2.4, 0.4), c(-2.0, -2.8), c(2.2, -2.9)]);
        let tp = integrate_along_path(&conn, &p, &y0, t, &tol).unwrap().matrix;
        let tq = integrate_along_path(&conn, &q, &tp, t, &tol).unwrap().matrix;
        let concat = p.concat(&q).unwrap();
        let tc = integrate_along_path(&conn, &concat, &y0, t, &tol).unwrap().matrix;
        let comp_res = mat2::norm(&(tq - tc));
        println!("tol {t:.0e}: reversal {rev_res:.3e}, composition {comp_res:.3e}");
    }
}
