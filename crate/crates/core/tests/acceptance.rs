//! Full-profile acceptance battery. Each criterion prints one pass/fail
//! line (visible with --nocapture, or on failure) and then asserts.

use entirelab::acceptance::{self, CriterionResult, Profile};

fn report(result: &CriterionResult) {
    println!(
        "{} [{}]: {} -- {}",
        result.id,
        if result.pass { "pass" } else { "FAIL" },
        result.title,
        result.detail
    );
    assert!(result.pass, "{} failed: {}", result.id, result.detail);
}

#[test]
fn a1_gaussian_second_moment() {
    report(&acceptance::second_moment_agreement(&Profile::full()).unwrap());
}

#[test]
fn a2_bessel_asymptotics() {
    report(&acceptance::bessel_asymptotics().unwrap());
}

#[test]
fn a3_density_floor() {
    report(&acceptance::density_floor(&Profile::full()).unwrap());
}

#[test]
fn a4_joint_probability_closed_form() {
    report(&acceptance::joint_probability_agreement(&Profile::full()).unwrap());
}

#[test]
fn a5_variance_scaling_slope() {
    report(&acceptance::variance_slope(&Profile::full()).unwrap());
}

#[test]
fn a6_growth_envelope_drift() {
    report(&acceptance::growth_envelope_drift(&Profile::full()).unwrap());
}

#[test]
fn a7_gaussian_moment_identities() {
    report(&acceptance::moment_identities(&Profile::full()).unwrap());
}

#[test]
fn a8_radius_dichotomy() {
    report(&acceptance::radius_dichotomy(&Profile::full()).unwrap());
}

#[test]
fn a9_exact_identities() {
    report(&acceptance::exact_identities(&Profile::full()).unwrap());
}
