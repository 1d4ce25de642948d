#include "support.hpp"

#include "vasim/spinner/spinner.hpp"

#include <gtest/gtest.h>

using namespace vasim;
using namespace vasim::spinner;
using units::rpm_to_hz;

namespace {

// Closed-form simple linear regression, independent of the QR solve.
PropulsionFit ols_oracle(const std::vector<SpeedSample>& samples) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(samples.size());
    for (const auto& s : samples) {
        sx += s.frequency;
        sy += s.speed;
        sxx += s.frequency * s.frequency;
        sxy += s.frequency * s.speed;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

field::FieldSample helmholtz(double mT, double rpm, const Vec3& axis = Vec3::UnitX(), int sense = 1) {
    return {mT * 1e-3, axis.normalized(), rpm_to_hz(rpm), sense};
}

SpinnerState at(int segment, double s) {
    SpinnerState st;
    st.segment = segment;
    st.arc_s = s;
    return st;
}

} // namespace

TEST(Calibration, ReferenceAnchorsMatchFrozenOracle) {
    const auto fit = calibrate_propulsion(reference_anchors());
    EXPECT_NEAR(fit.slope, 0.001206355302279484, 1e-15);
    EXPECT_NEAR(fit.intercept, -0.01842641228939546, 1e-14);
    const auto oracle = ols_oracle(reference_anchors());
    EXPECT_NEAR(fit.slope, oracle.slope, 1e-15);
    EXPECT_NEAR(fit.intercept, oracle.intercept, 1e-14);
    // About 2.0 cm/s per krpm and -1.8 cm/s.
    EXPECT_NEAR(fit.slope * rpm_to_hz(1000.0) / units::cm_per_s, 2.0, 0.05);
    EXPECT_NEAR(fit.intercept / units::cm_per_s, -1.84, 0.01);
}

TEST(Calibration, AnchorsReproducedWithinOneCentimetrePerSecond) {
    const auto report = calibration_report(reference_anchors());
    EXPECT_LE(report.max_abs_residual, 0.01);
    ASSERT_EQ(report.residuals.size(), 3u);
}

TEST(Calibration, CollinearPointsInterpolateExactly) {
    const auto report = calibration_report({{rpm_to_hz(1000.0), 0.01}, {rpm_to_hz(2000.0), 0.02}});
    EXPECT_NEAR(report.fit.slope * rpm_to_hz(1000.0), 0.01, 1e-16);
    EXPECT_NEAR(report.fit.intercept, 0.0, 1e-16);
    for (double r : report.residuals) EXPECT_NEAR(r, 0.0, 1e-16);
}

TEST(Calibration, RejectsTooFewOrDegenerateSamples) {
    auto code = [](const std::vector<SpeedSample>& s) {
        try {
            calibrate_propulsion(s);
        } catch (const ValidationError& e) {
            return e.code();
        }
        return ValidationCode::Schema;
    };
    EXPECT_EQ(code({{10.0, 0.01}}), ValidationCode::InsufficientSamples);
    EXPECT_EQ(code({{10.0, 0.01}, {10.0, 0.02}}), ValidationCode::InsufficientSamples);
}

TEST(Calibration, AnchorCsvParsing) {
    const auto samples = parse_anchor_csv("rpm,speed_cm_per_s\n# note\n2000,2.6\n\n8400,14.5\r\n30000,58.6\n");
    ASSERT_EQ(samples.size(), 3u);
    EXPECT_DOUBLE_EQ(samples[1].frequency, 140.0);
    EXPECT_DOUBLE_EQ(samples[1].speed, 0.145);
    EXPECT_THROW(parse_anchor_csv("2000,2.6\n8400,abc\n"), ParseError);
}

TEST(PropulsionSpeed, ClampedAtZero) { EXPECT_EQ(propulsion_speed(0.0, default_propulsion_fit()), 0.0); }

TEST(PropulsionSpeed, EightPointFourKrpmNearMeasuredSpeed) {
    EXPECT_NEAR(propulsion_speed(rpm_to_hz(8400.0), default_propulsion_fit()), 0.145, 0.1 * 0.145);
}

TEST(PropulsionSpeed, TwoKrpmWithinTwentyPercentOfMeasured) {
    const double v = propulsion_speed(rpm_to_hz(2000.0), default_propulsion_fit());
    EXPECT_NEAR(v, 0.022, 0.2 * 0.022);
}

TEST(PropulsionSpeed, SeparatelyCalibratedLargerSpinner) {
    // A 3.5 mm OD spinner fit pinned at its 9.6k rpm measurement and the clamp origin.
    const auto fit = calibrate_propulsion({{0.0, 0.0}, {rpm_to_hz(9600.0), 0.564}});
    EXPECT_NEAR(propulsion_speed(rpm_to_hz(9600.0), fit), 0.564, 1e-12);
}

TEST(PropulsionSpeed, PropertyMonotoneAndAffineAboveClamp) {
    test::Rng rng(41);
    const auto fit = default_propulsion_fit();
    const double clamp = -fit.intercept / fit.slope;
    double previous = 0.0;
    for (double f = 0.0; f < 600.0; f += rng.uniform(0.01, 3.0)) {
        const double v = propulsion_speed(f, fit);
        EXPECT_GE(v, previous);
        if (f > clamp) {
            EXPECT_NEAR(v, fit.slope * f + fit.intercept, 1e-15);
        } else {
            EXPECT_EQ(v, 0.0);
        }
        previous = v;
    }
}

TEST(Suction, LinearThroughSixCentimetresPerSecondAtTwoKrpm) {
    EXPECT_NEAR(suction_speed(rpm_to_hz(2000.0)), 0.060, 1e-15);
    EXPECT_EQ(suction_speed(0.0), 0.0);
    EXPECT_NEAR(suction_speed(rpm_to_hz(4000.0)), 0.120, 1e-15);
}

TEST(ClassifyMode, AnchorPairs) {
    EXPECT_EQ(classify_mode(15e-3, rpm_to_hz(2000)), Mode::Flip);
    EXPECT_EQ(classify_mode(15e-3, rpm_to_hz(4800)), Mode::Spin);
    EXPECT_EQ(classify_mode(15e-3, rpm_to_hz(9000)), Mode::StepOut);
    EXPECT_EQ(classify_mode(20e-3, rpm_to_hz(8400)), Mode::Spin);
    EXPECT_EQ(classify_mode(0.0, rpm_to_hz(5000)), Mode::Idle);
    EXPECT_EQ(classify_mode(15e-3, 0.0), Mode::Idle);
}

TEST(ClassifyMode, PropertyFlipSpinStepOutContiguous) {
    test::Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const double B = rng.uniform(2e-3, 50e-3);
        int stage = 0; // 0 flip, 1 spin, 2 step-out
        for (double f = 0.5; f < 600.0; f += 0.5) {
            const Mode m = classify_mode(B, f);
            const int now = m == Mode::Flip ? 0 : m == Mode::Spin ? 1 : 2;
            ASSERT_NE(m, Mode::Idle);
            EXPECT_GE(now, stage) << "B=" << B << " f=" << f;
            stage = now;
        }
        EXPECT_EQ(stage, 2);
    }
}

TEST(ChooseBranch, AlignedBranchWins) {
    const std::vector<BranchCandidate> c = {{3, Vec3::UnitX()}, {4, Vec3::UnitY()}};
    EXPECT_EQ(choose_branch(c, Vec3::UnitX(), kPi / 3), 3);
}

TEST(ChooseBranch, StallBeyondCutoff) {
    const double a = 75.0 * kPi / 180.0;
    const std::vector<BranchCandidate> c = {{3, Vec3(std::cos(a), std::sin(a), 0)}, {4, Vec3(std::cos(a), -std::sin(a), 0)}};
    EXPECT_FALSE(choose_branch(c, Vec3::UnitX(), kPi / 3).has_value());
}

TEST(ChooseBranch, TieGoesToLowerId) {
    const double a = 30.0 * kPi / 180.0;
    const std::vector<BranchCandidate> c = {{7, Vec3(std::cos(a), std::sin(a), 0)}, {5, Vec3(std::cos(a), -std::sin(a), 0)}};
    EXPECT_EQ(choose_branch(c, Vec3::UnitX(), kPi / 3), 5);
    EXPECT_THROW(choose_branch({}, Vec3::UnitX(), kPi / 3), ValidationError);
}

TEST(ChooseBranch, PropertyInvariantUnderPositiveScaling) {
    test::Rng rng(43);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<BranchCandidate> c;
        const int n = rng.integer(1, 4);
        for (int i = 0; i < n; ++i) c.push_back({i + 1, rng.unit_vector()});
        const Vec3 d = rng.unit_vector();
        const auto base = choose_branch(c, d, kPi / 3);
        EXPECT_EQ(choose_branch(c, d * rng.uniform(1e-3, 1e3), kPi / 3), base);
    }
}

class TubeDynamics : public ::testing::Test {
  protected:
    vascular::VesselNetwork net = test::straight_tube(0.4, 1.75e-3, 1e-6, 3.0, 1.0);
    vascular::Resistances res = vascular::build_resistances(net, 3.5e-3);
    SpinnerSpec spec;

    vascular::FlowField flow_at(double t) const {
        return vascular::solve_flow(net, res, vascular::inflow_waveform(t, net.inflow()));
    }
    vascular::FlowField still() const { return vascular::solve_flow(net, res, 0.0); }
};

TEST_F(TubeDynamics, FlipOnlyAdvects) {
    const auto flow = flow_at(0.3);
    const double u = vascular::local_velocity(net, flow, 1, 0.1);
    for (double rpm : {500.0, 2000.0, 3500.0}) {
        const auto out = advance_spinner(net, flow, at(1, 0.1), spec, helmholtz(15, rpm), 1e-3);
        EXPECT_EQ(out.state.mode, Mode::Flip);
        EXPECT_NEAR(out.state.arc_s, 0.1 + u * 1e-3, 1e-16);
    }
}

TEST_F(TubeDynamics, NoForcingNoMotion) {
    const auto start = at(1, 0.1);
    auto expected = start;
    expected.position = vascular::segment_frame(net, 1, 0.1).point;
    const auto out = advance_spinner(net, still(), start, spec, helmholtz(15, 0), 1e-3);
    EXPECT_EQ(out.state, expected);
    EXPECT_TRUE(out.events.empty());
}

TEST_F(TubeDynamics, ReversingSenseNegatesPropulsionOnly) {
    const auto flow = flow_at(0.1);
    const auto tangent = Vec3::UnitX();
    const double u = vascular::local_velocity(net, flow, 1, 0.2);
    const auto fwd = translation_rate(at(1, 0.2), spec, helmholtz(20, 8400, Vec3::UnitX(), 1), u, tangent);
    const auto rev = translation_rate(at(1, 0.2), spec, helmholtz(20, 8400, Vec3::UnitX(), -1), u, tangent);
    EXPECT_EQ(fwd.propulsion, -rev.propulsion);
    EXPECT_EQ(fwd.advection, rev.advection);
    EXPECT_GT(fwd.propulsion, 0.0);
}

TEST_F(TubeDynamics, PropertySenseAntisymmetry) {
    test::Rng rng(44);
    for (int trial = 0; trial < 500; ++trial) {
        const Vec3 axis = rng.unit_vector();
        const double u = rng.uniform(-0.3, 0.3);
        const double mT = rng.uniform(0, 50);
        const double rpm = rng.uniform(0, 15000);
        const auto a = translation_rate(at(1, 0.2), spec, helmholtz(mT, rpm, axis, 1), u, Vec3::UnitX());
        const auto b = translation_rate(at(1, 0.2), spec, helmholtz(mT, rpm, axis, -1), u, Vec3::UnitX());
        EXPECT_EQ(a.propulsion, -b.propulsion);
        EXPECT_EQ(a.advection, b.advection);
    }
}

TEST_F(TubeDynamics, MisalignmentBeyondCutoffStallsPropulsion) {
    const double a = 70.0 * kPi / 180.0;
    const auto k = translation_rate(at(1, 0.2), spec, helmholtz(20, 8400, Vec3(std::cos(a), std::sin(a), 0)), 0.05,
                                    Vec3::UnitX());
    EXPECT_TRUE(k.stalled);
    EXPECT_EQ(k.propulsion, 0.0);
    EXPECT_EQ(k.rate, 0.05);
    // Within the cutoff the thrust scales with cos θ.
    const double b = 40.0 * kPi / 180.0;
    const auto k2 = translation_rate(at(1, 0.2), spec, helmholtz(20, 8400, Vec3(std::cos(b), std::sin(b), 0)), 0.0,
                                     Vec3::UnitX());
    EXPECT_NEAR(k2.propulsion, std::cos(b) * propulsion_speed(140.0, spec.propulsion), 1e-15);
}

TEST_F(TubeDynamics, OneCardiacCycleAgainstPulsatileFlowGainsGround) {
    // Thrust toward -x, flow toward +x: mean 10.4 cm/s, peak 31 cm/s.
    SpinnerState st = at(1, 0.3);
    const double dt = 1e-3;
    for (int k = 0; k < 1000; ++k) {
        st = advance_spinner(net, flow_at(k * dt), st, spec, helmholtz(20, 8400, -Vec3::UnitX()), dt).state;
    }
    EXPECT_LT(st.arc_s, 0.3);
    EXPECT_EQ(st.mode, Mode::Spin);
}

TEST_F(TubeDynamics, CapturedIsAbsorbing) {
    SpinnerState st = at(1, 0.2);
    st.mode = Mode::Captured;
    test::Rng rng(45);
    for (int i = 0; i < 100; ++i) {
        const auto out = advance_spinner(net, flow_at(rng.uniform(0, 1)), st, spec,
                                         helmholtz(rng.uniform(0, 50), rng.uniform(0, 15000), rng.unit_vector()), 1e-3);
        EXPECT_EQ(out.state, st);
    }
}

TEST_F(TubeDynamics, RejectsNonPositiveStep) {
    EXPECT_THROW(advance_spinner(net, still(), at(1, 0.1), spec, helmholtz(0, 0), 0.0), ValidationError);
}

TEST_F(TubeDynamics, PropertyHalfStepsAgreeToFirstOrder) {
    // Two half steps against one full step on a smoothly varying flow.
    test::Rng rng(46);
    for (int trial = 0; trial < 200; ++trial) {
        const double t = rng.uniform(0.0, 0.45); // within the rising/falling pulse, no kink
        const double dt = 1e-3;
        const auto field = helmholtz(20, rng.uniform(5000, 9000), rng.coin() ? Vec3(Vec3::UnitX()) : Vec3(-Vec3::UnitX()));
        const auto start = at(1, 0.2);
        const double full = advance_spinner(net, flow_at(t), start, spec, field, dt).state.arc_s;
        const auto half = advance_spinner(net, flow_at(t), start, spec, field, dt / 2).state;
        const double two_halves = advance_spinner(net, flow_at(t + dt / 2), half, spec, field, dt / 2).state.arc_s;
        // |du/dt| ≤ 2π f Q̄ A / area, with the canonical constants.
        const double dudt = 2.0 * kPi * 1.0 * 1e-6 * 2.934 / (kPi * 1.75e-3 * 1.75e-3);
        EXPECT_LE(std::abs(full - two_halves), dt * dt * dudt);
    }
}

namespace {

const vascular::VesselNetwork& pulmonary() {
    static const auto net = vascular::load_network_file(test::fixture("pulmonary.json").string());
    return net;
}

} // namespace

TEST(Routing, AlignedAxisTakesMatchingBranch) {
    const auto& net = pulmonary();
    const auto res = vascular::build_resistances(net, 3.5e-3);
    const auto flow = vascular::solve_flow(net, res, 0.0);
    SpinnerSpec spec;
    const Vec3 up = Vec3(1, 1, 0).normalized();
    const Vec3 down = Vec3(1, -1, 0).normalized();
    for (const auto& [axis, expected] : {std::pair{up, 2}, std::pair{down, 3}}) {
        // 1 mm before the end of the trunk, thrust along the axis.
        auto out = advance_spinner(net, flow, at(1, 0.0595), spec, helmholtz(20, 8400, axis), 0.01);
        ASSERT_EQ(out.events.size(), 1u);
        EXPECT_EQ(out.events[0].kind, RoutingEvent::Kind::JunctionTaken);
        EXPECT_EQ(out.events[0].segment, expected);
        EXPECT_EQ(out.events[0].node, 2);
        EXPECT_EQ(out.state.segment, expected);
    }
}

TEST(Routing, PerpendicularAxisStallsAtJunction) {
    const auto& net = pulmonary();
    const auto flow = vascular::solve_flow(net, vascular::build_resistances(net, 3.5e-3), 0.0);
    SpinnerSpec spec;
    // Axis tilted 50° from the trunk: it still propels along the trunk but is
    // more than 60° from both 45° branches only if it points out of plane.
    const Vec3 axis = Vec3(std::cos(0.87), 0, std::sin(0.87));
    auto out = advance_spinner(net, flow, at(1, 0.0599), spec, helmholtz(20, 8400, axis), 0.01);
    ASSERT_EQ(out.events.size(), 1u);
    EXPECT_EQ(out.events[0].kind, RoutingEvent::Kind::JunctionStall);
    EXPECT_EQ(out.state.segment, 1);
    EXPECT_EQ(out.state.arc_s, net.segment(1).length);
    EXPECT_TRUE(out.state.junction_stalled);
    // Held: the stall is reported once.
    auto again = advance_spinner(net, flow, out.state, spec, helmholtz(20, 8400, axis), 0.01);
    EXPECT_TRUE(again.events.empty());
}

TEST(Routing, ReversedSenseReturnsThroughSameNode) {
    const auto& net = pulmonary();
    const auto flow = vascular::solve_flow(net, vascular::build_resistances(net, 3.5e-3), 0.0);
    SpinnerSpec spec;
    const Vec3 up = Vec3(1, 1, 0).normalized();
    auto st = at(2, 0.0005);
    auto out = advance_spinner(net, flow, st, spec, helmholtz(20, 8400, up, -1), 0.01);
    ASSERT_EQ(out.events.size(), 1u);
    EXPECT_EQ(out.events[0].segment, 1);
    EXPECT_EQ(out.events[0].node, 2);
    EXPECT_EQ(out.state.segment, 1);
    EXPECT_LT(out.state.arc_s, net.segment(1).length);
}

TEST(Sac, EntryAndExitByAxisAtNeck) {
    const auto net = vascular::load_network_file(test::fixture("cerebral.json").string());
    const auto flow = vascular::solve_flow(net, vascular::build_resistances(net, 3.5e-3), 0.0);
    SpinnerSpec spec;
    const auto& sac = net.sac(1);
    auto in = advance_spinner(net, flow, at(2, sac.arc_position), spec, helmholtz(20, 8400, sac.normal), 1e-3);
    ASSERT_TRUE(in.state.sac.has_value());
    EXPECT_EQ(*in.state.sac, 1);
    EXPECT_TRUE(in.state.position.isApprox(vascular::sac_center(net, sac)));
    // Inside, FLIP holds position; reversed thrust leaves through the neck.
    auto hold = advance_spinner(net, flow, in.state, spec, helmholtz(15, 2000, sac.normal), 1e-3);
    EXPECT_TRUE(hold.state.sac.has_value());
    auto out = advance_spinner(net, flow, in.state, spec, helmholtz(20, 8400, sac.normal, -1), 1e-3);
    EXPECT_FALSE(out.state.sac.has_value());
    EXPECT_EQ(out.state.segment, 2);
    EXPECT_EQ(out.state.arc_s, sac.arc_position);
}
