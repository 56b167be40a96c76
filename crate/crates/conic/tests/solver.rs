use std::time::Instant;

use jgmc_conic::{
    smat, solve, svec, svec_len, verify_kkt, ConeSpec, ConicProgram, DualVector, SolveStatus, SolverSettings,
    SparseMatrix,
};
use nalgebra::DMatrix;

fn min_eigenvalue_program(c: &DMatrix<f64>) -> ConicProgram {
    let n = c.nrows();
    let trace: Vec<(usize, usize, f64)> = (0..n).map(|i| (0, jgmc_conic::svec_index(n, i, i), 1.0)).collect();
    let a = SparseMatrix::from_triplets(1, svec_len(n), &trace);
    ConicProgram::new(svec(c).unwrap(), a, vec![1.0], ConeSpec::new(0, 0, vec![n])).unwrap()
}

/// Unit-weight MAX CUT on `w`: minimize <W, L> with diag(L) = 1, L psd.
fn maxcut_program(w: &DMatrix<f64>) -> ConicProgram {
    let n = w.nrows();
    let rows: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, jgmc_conic::svec_index(n, i, i), 1.0)).collect();
    let a = SparseMatrix::from_triplets(n, svec_len(n), &rows);
    ConicProgram::new(svec(w).unwrap(), a, vec![1.0; n], ConeSpec::new(0, 0, vec![n])).unwrap()
}

fn assert_kkt(p: &ConicProgram, x: &[f64], dual: &DualVector, tol: f64) {
    let r = verify_kkt(p, x, dual);
    assert!(r.max() <= tol, "residuals {r:?} exceed {tol}");
}

#[test]
fn minimum_eigenvalue_program() {
    let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
    let p = min_eigenvalue_program(&c);
    let t = Instant::now();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert!(t.elapsed().as_secs_f64() <= 5.0);
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    assert!((sol.report.primal_objective + 1.0).abs() < 1e-5);
    let z = smat(&sol.x, 2);
    assert!((z - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).amax() < 1e-5);
    assert_kkt(&p, &sol.x, &sol.dual, 1e-6);
}

#[test]
fn lp_with_shift() {
    // x = 3 + s, s >= 0, minimize x.
    let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]);
    let p = ConicProgram::new(vec![1.0, 0.0], a, vec![3.0], ConeSpec::new(1, 1, vec![])).unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 3.0).abs() < 1e-5);
    assert_kkt(&p, &sol.x, &sol.dual, 1e-6);
}

#[test]
fn triangle_maxcut_between_cut_and_closed_form() {
    let w = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
    let p = maxcut_program(&w);
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    // Cut value: sum_{i<j} 2 w_ij (1 - L_ij) = 2 sum w - <W, L>.
    let value = 2.0 * 3.0 - sol.report.primal_objective;
    assert!(value >= 8.0 && value <= 9.0 + 1e-5, "relaxed cut {value}");
    let l = smat(&sol.x, 3);
    for i in 0..3 {
        for j in 0..3 {
            let expect = if i == j { 1.0 } else { -0.5 };
            assert!((l[(i, j)] - expect).abs() < 1e-4);
        }
    }
    assert_kkt(&p, &sol.x, &sol.dual, 1e-6);
}

#[test]
fn verify_kkt_on_hand_built_pair() {
    let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
    let p = min_eigenvalue_program(&c);
    let x = vec![0.0, 0.0, 1.0];
    let dual = DualVector { eq: vec![-1.0], cone: vec![2.0, 0.0, 0.0] };
    assert!(verify_kkt(&p, &x, &dual).max() <= 1e-9);
    let mut bad = x.clone();
    bad[0] += 0.1;
    assert!(verify_kkt(&p, &bad, &dual).primal > 1e-3);
}

#[test]
fn detects_primal_infeasibility() {
    let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]);
    let p = ConicProgram::new(vec![0.0], a, vec![-1.0], ConeSpec::new(0, 1, vec![])).unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.report.status, SolveStatus::PrimalInfeasible);
    // Farkas: A'y = z with z >= 0 and b'y < 0.
    assert!(sol.dual.eq[0] > 0.0);
}

#[test]
fn detects_unboundedness() {
    let p = ConicProgram::new(vec![-1.0], SparseMatrix::zeros(0, 1), vec![], ConeSpec::new(0, 1, vec![])).unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.report.status, SolveStatus::DualInfeasible);
    assert!(sol.x[0] > 0.0);
}

#[test]
fn rejects_malformed_input() {
    let a = SparseMatrix::zeros(1, 2);
    assert!(ConicProgram::new(vec![0.0; 3], a.clone(), vec![0.0], ConeSpec::new(3, 0, vec![])).is_err());
    assert!(ConicProgram::new(vec![f64::NAN, 0.0], a, vec![0.0], ConeSpec::new(2, 0, vec![])).is_err());
    let bad = SolverSettings { alpha: 2.5, ..SolverSettings::default() };
    let p = min_eigenvalue_program(&DMatrix::identity(2, 2));
    assert!(solve(&p, &bad).is_err());
}

#[test]
fn identical_inputs_give_identical_runs() {
    let w = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { ((i * 7 + j * 7) % 5) as f64 + 1.0 });
    let p = maxcut_program(&w);
    let set = SolverSettings { record_log: true, ..SolverSettings::default() };
    let a = solve(&p, &set).unwrap();
    let b = solve(&p, &set).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.report.log, b.report.log);
    assert_eq!(a.report.iterations, b.report.iterations);
}

#[test]
fn weak_duality_holds_on_maxcut() {
    let w = DMatrix::from_fn(6, 6, |i, j| if i == j { 0.0 } else { 1.0 + ((i + 2 * j) % 3) as f64 });
    let w = (&w + w.transpose()) * 0.5;
    let p = maxcut_program(&w);
    let set = SolverSettings::default();
    let sol = solve(&p, &set).unwrap();
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    let gap_tol = set.eps_gap * (1.0 + sol.report.primal_objective.abs() + sol.report.dual_objective.abs());
    assert!(sol.report.primal_objective >= sol.report.dual_objective - gap_tol);
}
