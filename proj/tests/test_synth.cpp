#include <doctest.h>

#include <cmath>

#include "emgsa/synth.hpp"

using namespace emgsa;

TEST_SUITE_BEGIN("synth");

TEST_CASE("all variability knobs at zero give identical subject models") {
    CohortConfig cfg;
    cfg.n_subjects = 4;
    cfg.gain_spread = 0.0;
    cfg.shift_strength = 0.0;
    cfg.activation_jitter = 0.0;
    cfg.seed = 3;
    SubjectModel first = sample_subject_model(cfg, 0);
    CHECK(first.mixing.isIdentity(1e-15));
    CHECK((first.channel_gains.array() == 1.0).all());
    for (int s = 1; s < 4; ++s) {
        SubjectModel m = sample_subject_model(cfg, s);
        CHECK(m.activation == first.activation);
        CHECK(m.channel_gains == first.channel_gains);
        CHECK(m.mixing == first.mixing);
    }
}

TEST_CASE("subject model and window generation are deterministic") {
    CohortConfig cfg;
    cfg.n_subjects = 3;
    cfg.seed = 11;
    SubjectModel a = sample_subject_model(cfg, 2);
    SubjectModel b = sample_subject_model(cfg, 2);
    CHECK(a.activation == b.activation);
    CHECK(a.channel_gains == b.channel_gains);
    CHECK(a.mixing == b.mixing);

    EmgWindow w1 = generate_window(a, 1, 12345);
    EmgWindow w2 = generate_window(a, 1, 12345);
    CHECK(w1 == w2);
    EmgWindow w3 = generate_window(a, 1, 12346);
    CHECK(w1.samples != w3.samples);
}

TEST_CASE("mixing rows are stochastic with mass only on neighbors") {
    CohortConfig cfg;
    cfg.n_subjects = 2;
    cfg.shift_strength = 0.3;
    cfg.seed = 9;
    SubjectModel m = sample_subject_model(cfg, 1);
    for (int r = 0; r < kChannels; ++r) {
        double row_sum = 0.0;
        for (int c = 0; c < kChannels; ++c) {
            const double v = m.mixing(r, c);
            CHECK(v >= 0.0);
            row_sum += v;
            const int dist = detail::circular_distance(r, c, kChannels);
            if (dist > 1) CHECK(v == 0.0);  // off-diagonal mass only on adjacent channels
        }
        CHECK(std::abs(row_sum - 1.0) < 1e-9);
        CHECK(m.mixing(r, r) >= 1.0 - cfg.shift_strength - 1e-12);  // diag keeps at least 1 - s
    }
}

TEST_CASE("model invariants hold under default knobs") {
    CohortConfig cfg;
    cfg.seed = 4;
    for (int s = 0; s < cfg.n_subjects; ++s) {
        SubjectModel m = sample_subject_model(cfg, s);
        CHECK((m.channel_gains.array() > 0.0).all());
        CHECK((m.channel_gains.array() >= 1.0 / (1.0 + cfg.gain_spread) - 1e-12).all());
        CHECK((m.channel_gains.array() <= 1.0 + cfg.gain_spread + 1e-12).all());
        CHECK((m.activation.array() > 0.0).all());
        CHECK(m.noise_floor > 0.0);
        for (int r = 0; r < kChannels; ++r) CHECK(std::abs(m.mixing.row(r).sum() - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS(sample_subject_model(cfg, cfg.n_subjects), ArgumentError);
    CHECK_THROWS_AS(sample_subject_model(cfg, -1), ArgumentError);
}

TEST_CASE("zero-activation window std matches the configured scale per channel") {
    CohortConfig cfg;
    cfg.n_subjects = 1;
    cfg.activation_jitter = 0.0;
    cfg.seed = 17;
    SubjectModel m = sample_subject_model(cfg, 0);
    m.activation.setZero();
    const double sigma = m.noise_floor;
    EmgWindow w = generate_window(m, 0, 99);
    for (int c = 0; c < kChannels; ++c) {
        // Post-mix std for independent pre-channels with equal sigma.
        const double gain_factor = m.channel_gains(c) * m.mixing.row(c).norm();
        const auto row = w.samples.row(c);
        const double mean = row.mean();
        const double sd = std::sqrt((row.array() - mean).square().sum() / (row.cols() - 1));
        CHECK(sd == doctest::Approx(sigma * gain_factor).epsilon(0.10));
        // Zero-mean construction: the FIR blocks DC, so the sample mean is tiny.
        CHECK(std::abs(mean) < 5.0 * sd / std::sqrt(800.0));
    }
}

TEST_CASE("generate_window validates the gesture label") {
    CohortConfig cfg;
    cfg.n_subjects = 1;
    SubjectModel m = sample_subject_model(cfg, 0);
    CHECK_THROWS_AS(generate_window(m, 4, 1), ArgumentError);
    CHECK_THROWS_AS(generate_window(m, -1, 1), ArgumentError);
}

TEST_CASE("cohort has the configured counts and is reproducible") {
    CohortConfig cfg;
    cfg.n_subjects = 3;
    cfg.windows_per_gesture = 7;
    cfg.seed = 21;
    Dataset d = generate_cohort(cfg);
    CHECK(d.windows.size() == 3u * 4u * 7u);
    int per_subject[3] = {0, 0, 0};
    int per_pair[3][4] = {};
    for (const auto& w : d.windows) {
        ++per_subject[w.subject_id];
        ++per_pair[w.subject_id][w.gesture];
    }
    for (int s = 0; s < 3; ++s) {
        CHECK(per_subject[s] == 28);
        for (int g = 0; g < 4; ++g) CHECK(per_pair[s][g] == 7);
    }
    Dataset d2 = generate_cohort(cfg);
    CHECK(d == d2);

    CohortConfig one = cfg;
    one.n_subjects = 1;
    Dataset single = generate_cohort(one);
    CHECK(single.windows.size() == 28);
    single.validate();
}

TEST_CASE("streamed feature matrix equals extract_matrix over the generated cohort") {
    CohortConfig cfg;
    cfg.n_subjects = 2;
    cfg.windows_per_gesture = 3;
    cfg.seed = 31;
    FeatureMatrix streamed = synth_feature_matrix(cfg);
    FeatureMatrix full = extract_matrix(generate_cohort(cfg));
    CHECK(streamed.values == full.values);
    CHECK(streamed.labels == full.labels);
    CHECK(streamed.subjects == full.subjects);
}

TEST_CASE("cohort config key=value round trip") {
    CohortConfig cfg;
    cfg.n_subjects = 5;
    cfg.windows_per_gesture = 12;
    cfg.gain_spread = 0.75;
    cfg.shift_strength = 0.125;
    cfg.activation_jitter = 0.0625;
    cfg.seed = 987654321;
    CohortConfig back = parse_cohort_config(serialize_cohort_config(cfg));
    CHECK(back.n_subjects == cfg.n_subjects);
    CHECK(back.windows_per_gesture == cfg.windows_per_gesture);
    CHECK(back.gain_spread == cfg.gain_spread);
    CHECK(back.shift_strength == cfg.shift_strength);
    CHECK(back.activation_jitter == cfg.activation_jitter);
    CHECK(back.seed == cfg.seed);

    CHECK_THROWS_AS(parse_cohort_config("nonsense line"), FormatError);
    CHECK_THROWS_AS(parse_cohort_config("bogus_key=1"), FormatError);
    CHECK_THROWS_AS(parse_cohort_config("shift_strength=1.5"), ArgumentError);
}

TEST_SUITE_END();
