#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sde/errors.hpp"
#include "sde/harness.hpp"

using namespace sde;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.total_steps = 300;
    cfg.batch_size = 8;
    cfg.embed_dim = 16;
    cfg.seed = 3;
    return cfg;
}

SyntheticTaskConfig tiny_task_config() {
    SyntheticTaskConfig tc;
    tc.latent_dim = 6;
    tc.nuisance_dim = 4;
    tc.ambient_dim = 20;
    tc.pairs = 96;
    tc.train_pairs = 64;
    tc.noise_scale = 0.3;
    tc.seed = 3;
    return tc;
}

}  // namespace

TEST_CASE("generate_task is deterministic and splits disjointly") {
    const SyntheticTaskConfig tc = tiny_task_config();
    const SyntheticTask a = generate_task(tc);
    const SyntheticTask b = generate_task(tc);
    CHECK(oracle::bitwise_equal(a.train_x, b.train_x));
    CHECK(oracle::bitwise_equal(a.test_y, b.test_y));
    CHECK(a.train_x.rows() == 64);
    CHECK(a.test_x.rows() == 32);

    SyntheticTaskConfig other = tc;
    other.seed = 4;
    CHECK_FALSE(oracle::bitwise_equal(generate_task(other).train_x, a.train_x));
}

TEST_CASE("generate_task validates its dimensions") {
    SyntheticTaskConfig tc = tiny_task_config();
    tc.pairs = tc.train_pairs + 1;  // leaves only one test pair
    CHECK_THROWS_AS(generate_task(tc), ConfigError);
    tc = tiny_task_config();
    tc.ambient_dim = 0;
    CHECK_THROWS_AS(generate_task(tc), ConfigError);
}

TEST_CASE("noiseless task is solved exactly by the least-squares oracle") {
    SyntheticTaskConfig tc;
    tc.latent_dim = 16;
    tc.nuisance_dim = 0;
    tc.ambient_dim = 16;
    tc.pairs = 80;
    tc.train_pairs = 48;
    tc.noise_scale = 0.0;
    tc.seed = 11;
    const SyntheticTask task = generate_task(tc);

    EncoderParams oracle_params;
    oracle_params.wx = oracle::least_squares_map(task.train_x, task.train_y);
    oracle_params.wy = Matrix::identity(16);
    CHECK(precision_at_1(oracle_params, task.test_x, task.test_y) == 1.0);
}

TEST_CASE("zero latent dimension makes the pairing unlearnable") {
    double total = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        SyntheticTaskConfig tc = tiny_task_config();
        tc.latent_dim = 0;
        tc.seed = 200 + static_cast<std::uint64_t>(s);
        const SyntheticTask task = generate_task(tc);
        Rng rng(tc.seed);
        EncoderParams params;
        params.wx = gaussian_matrix(rng, tc.ambient_dim, 16, 1.0);
        params.wy = gaussian_matrix(rng, tc.ambient_dim, 16, 1.0);
        total += precision_at_1(params, task.test_x, task.test_y);
    }
    const double mean = total / seeds;
    const double expected = 1.0 / 32.0;
    const double stderr_bound = 3.0 * std::sqrt(expected * (1 - expected) / (32.0 * seeds));
    CHECK(std::abs(mean - expected) <= stderr_bound);
}

TEST_CASE("training reduces the contrastive loss on a learnable task") {
    const SyntheticTask task = generate_task(tiny_task_config());
    TrainConfig cfg = tiny_config();
    cfg.mode = LossMode::infonce_only;
    const TrainResult result = train(task, cfg);
    REQUIRE(result.log.size() == cfg.total_steps);
    CHECK(result.log.back().loss.feat < result.log.front().loss.feat);
}

TEST_CASE("sde training runs all modes and svd_grad variants") {
    const SyntheticTask task = generate_task(tiny_task_config());
    for (LossMode mode : {LossMode::sde, LossMode::feat_plus_hellinger,
                          LossMode::feat_plus_subspace}) {
        for (SvdGradMode grad : {SvdGradMode::straight_through, SvdGradMode::full}) {
            TrainConfig cfg = tiny_config();
            cfg.total_steps = 40;
            cfg.mode = mode;
            cfg.svd_grad = grad;
            const TrainResult result = train(task, cfg);
            CHECK(std::isfinite(result.log.back().loss.total));
            // Report identities hold in every mode.
            for (const StepRecord& rec : result.log) {
                CHECK(oracle::bitwise_equal(rec.loss.spec,
                                            0.5 * (rec.loss.hellinger + rec.loss.subspace)));
                CHECK(oracle::bitwise_equal(rec.loss.total,
                                            rec.loss.feat + rec.loss.lambda * rec.loss.spec));
            }
        }
    }
}

TEST_CASE("degenerate schedules reproduce the infonce baseline bitwise") {
    const SyntheticTask task = generate_task(tiny_task_config());

    TrainConfig nce = tiny_config();
    nce.mode = LossMode::infonce_only;
    const TrainResult base = train(task, nce);

    TrainConfig degenerate = tiny_config();
    degenerate.mode = LossMode::sde;
    degenerate.alpha_override = 0.0;
    degenerate.lambda_override = 0.0;
    const TrainResult deg = train(task, degenerate);

    REQUIRE(base.log.size() == deg.log.size());
    for (std::size_t t = 0; t < base.log.size(); ++t) {
        CHECK(oracle::bitwise_equal(base.log[t].loss.feat, deg.log[t].loss.feat));
    }
    CHECK(oracle::bitwise_equal(base.params.wx, deg.params.wx));
    CHECK(oracle::bitwise_equal(base.params.wy, deg.params.wy));
}

TEST_CASE("captured steps replay bit-for-bit from the recorded draws") {
    const SyntheticTask task = generate_task(tiny_task_config());
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 80;
    cfg.mode = LossMode::sde;
    cfg.capture_step = 60;  // alpha > 0 there
    const TrainResult r1 = train(task, cfg);
    const TrainResult r2 = train(task, cfg);
    REQUIRE(r1.captured.has_value());
    REQUIRE(r2.captured.has_value());

    const CapturedStep& cap = *r1.captured;
    CHECK(oracle::bitwise_equal(cap.x, r2.captured->x));
    CHECK(oracle::bitwise_equal(cap.loss.total, r2.captured->loss.total));

    // Replay: rebuild the enhanced batch from the recorded DeltaSpec alone.
    REQUIRE(cap.delta_x.has_value());
    const SpectralDecomposition dec_x = svd(cap.x);
    const SpectralDecomposition dec_y = svd(cap.y);
    const Matrix xe = enhance(cap.x, *cap.delta_x, dec_x);
    const Matrix ye = enhance(cap.y, *cap.delta_y, dec_y);
    CHECK(oracle::bitwise_equal(infonce(xe, ye, cfg.tau), cap.loss.feat));
}

TEST_CASE("training throws TrainingError on divergence") {
    const SyntheticTask task = generate_task(tiny_task_config());
    TrainConfig cfg = tiny_config();
    cfg.learning_rate = 1e305;
    cfg.total_steps = 50;
    CHECK_THROWS_AS(train(task, cfg), TrainingError);
}

TEST_CASE("train validates its configuration") {
    const SyntheticTask task = generate_task(tiny_task_config());
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 1000;
    CHECK_THROWS_AS(train(task, cfg), ConfigError);
    cfg = tiny_config();
    cfg.tau = 0.0;
    CHECK_THROWS_AS(train(task, cfg), ConfigError);
}

TEST_CASE("precision_at_1 on identity pairing is 1") {
    EncoderParams params;
    params.wx = Matrix::identity(4);
    params.wy = Matrix::identity(4);
    Rng rng(300);
    const Matrix x = gaussian_matrix(rng, 10, 4, 1.0);
    CHECK(precision_at_1(params, x, x) == 1.0);
}

TEST_CASE("precision_at_1 on reversed orthonormal rows is 0") {
    const std::size_t p = 6;  // even: no row pairs with itself
    EncoderParams params;
    params.wx = Matrix::identity(p);
    params.wy = Matrix::identity(p);
    const Matrix x = Matrix::identity(p);
    Matrix y(p, p);
    for (std::size_t i = 0; i < p; ++i) y(i, p - 1 - i) = 1.0;
    CHECK(precision_at_1(params, x, y) == 0.0);
}

TEST_CASE("precision_at_1 breaks ties by the lowest candidate index") {
    EncoderParams params;
    params.wx = Matrix::identity(3);
    params.wy = Matrix::identity(3);
    const Matrix x = Matrix::identity(3);
    // Targets 0 and 1 are identical: queries 0 and 1 both resolve to 0.
    const Matrix y = Matrix::from_rows({{1, 0, 0}, {1, 0, 0}, {0, 0, 1}});
    CHECK(precision_at_1(params, x, y) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("precision_at_1 of unrelated embeddings is about 1/P") {
    const std::size_t p = 32;
    double total = 0.0;
    const int seeds = 30;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(400 + static_cast<std::uint64_t>(s));
        EncoderParams params;
        params.wx = Matrix::identity(12);
        params.wy = Matrix::identity(12);
        const Matrix x = gaussian_matrix(rng, p, 12, 1.0);
        const Matrix y = gaussian_matrix(rng, p, 12, 1.0);
        total += precision_at_1(params, x, y);
    }
    const double mean = total / seeds;
    const double expected = 1.0 / static_cast<double>(p);
    CHECK(std::abs(mean - expected) <=
          3.0 * std::sqrt(expected * (1 - expected) / (p * seeds)));
}

TEST_CASE("precision_at_1 rejects degenerate input") {
    EncoderParams params;
    params.wx = Matrix::identity(3);
    params.wy = Matrix::identity(3);
    const Matrix one_row = Matrix::from_rows({{1, 0, 0}});
    CHECK_THROWS_AS(precision_at_1(params, one_row, one_row), RangeError);
    const Matrix with_zero = Matrix::from_rows({{1, 0, 0}, {0, 0, 0}});
    CHECK_THROWS_AS(precision_at_1(params, with_zero, with_zero), DegenerateInputError);
}

TEST_CASE("perturbed_eval with fraction 0 equals the clean score") {
    const SyntheticTask task = generate_task(tiny_task_config());
    Rng rng(500);
    EncoderParams params;
    params.wx = gaussian_matrix(rng, 20, 8, 1.0);
    params.wy = gaussian_matrix(rng, 20, 8, 1.0);
    Rng eval_rng(501);
    const double clean = precision_at_1(params, task.test_x, task.test_y);
    const double same = perturbed_eval(params, task.test_x, task.test_y, 0.0, eval_rng);
    CHECK(oracle::bitwise_equal(clean, same));
    CHECK_THROWS_AS(perturbed_eval(params, task.test_x, task.test_y, 1.5, eval_rng), RangeError);
}

TEST_CASE("perturbed_eval with 1-D embeddings degenerates to sign flips") {
    // All queries tie at cosine +-1, so the lowest positive target wins for
    // every query and exactly one query scores: P@1 == 1/P for any draw.
    const std::size_t p = 8;
    EncoderParams params;
    params.wx = Matrix::identity(1);
    params.wy = Matrix::identity(1);
    Matrix x(p, 1);
    for (std::size_t i = 0; i < p; ++i) x(i, 0) = 1.0 + static_cast<double>(i);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(600 + seed);
        CHECK(perturbed_eval(params, x, x, 1.0, rng) ==
              doctest::Approx(1.0 / static_cast<double>(p)));
    }
}

TEST_CASE("perturbation does not help on average") {
    const SyntheticTask task = generate_task(tiny_task_config());
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 150;
    const TrainResult trained = train(task, cfg);
    const double clean = precision_at_1(trained.params, task.test_x, task.test_y);

    const int seeds = 20;
    std::vector<double> perturbed(seeds);
    for (int s = 0; s < seeds; ++s) {
        Rng rng(700 + static_cast<std::uint64_t>(s));
        perturbed[s] = perturbed_eval(trained.params, task.test_x, task.test_y, 0.05, rng);
    }
    const auto m = oracle::moments(perturbed);
    CHECK(m.mean <= clean + m.stddev / std::sqrt(static_cast<double>(seeds)));
}

TEST_CASE("ablation suite emits the full grid in order") {
    SyntheticTaskConfig tc = tiny_task_config();
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 30;
    const std::vector<std::uint64_t> seeds{3, 4};
    const std::vector<AblationRow> rows = ablation_suite(tc, cfg, seeds, 0.05, 2);
    REQUIRE(rows.size() == 14);
    CHECK(rows[0].mode == "infonce_only");
    CHECK(rows[0].seed == 3);
    CHECK(rows[1].seed == 4);
    CHECK(rows[6].mode == "sde");
    CHECK(rows[12].mode == "sde_noise_only");
    for (const AblationRow& r : rows) {
        CHECK(r.clean_p1 >= 0.0);
        CHECK(r.clean_p1 <= 1.0);
        CHECK(std::isfinite(r.final_feat));
    }

    const std::string csv = ablation_table_csv(rows);
    CHECK(csv.rfind("mode,seed,clean_p1,perturbed_p1,final_feat,final_spec\n", 0) == 0);

    // Single-cell grid degenerates to one row.
    const std::vector<std::uint64_t> one_seed{3};
    CHECK(ablation_suite(tc, cfg, one_seed, 0.05, 1).size() == 7);
}

TEST_CASE("step 0 feat is identical across loss modes on equal seeds") {
    const SyntheticTask task = generate_task(tiny_task_config());
    std::vector<double> first_feats;
    for (LossMode mode : {LossMode::infonce_only, LossMode::feat_plus_hellinger,
                          LossMode::feat_plus_subspace, LossMode::sde}) {
        TrainConfig cfg = tiny_config();
        cfg.total_steps = 2;
        cfg.mode = mode;
        first_feats.push_back(train(task, cfg).log.front().loss.feat);
    }
    for (std::size_t i = 1; i < first_feats.size(); ++i) {
        CHECK(oracle::bitwise_equal(first_feats[0], first_feats[i]));
    }
}

TEST_CASE("enhance scope masking zeroes the inactive subspaces") {
    Rng rng(800);
    const Matrix f = gaussian_matrix(rng, 16, 24, 1.0);
    const SpectralDecomposition dec = svd(f);
    const SubspacePartition part = partition(dec, 16, 24);
    Rng draw(801);
    DeltaSpec delta = build_delta(dec, part, 0.9, draw);
    mask_delta_scope(delta, part, EnhanceScope::noise_only);
    for (std::size_t i : part.strong) CHECK(delta.deltas[i] == 0.0);
    for (std::size_t i : part.weak) CHECK(delta.deltas[i] == 0.0);
    for (double e : delta.epsilon_draws) CHECK(e == 0.0);
}
