#include "sde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "sde/errors.hpp"
#include "sde/matrix_io.hpp"

namespace sde {

namespace {

// Fixed fork tags for the independent random streams of a run.
constexpr std::uint64_t kTagInit = 0x696e6974;    // encoder init
constexpr std::uint64_t kTagBatch = 0x62617463;   // batch sampling
constexpr std::uint64_t kTagEnhance = 0x656e68;   // per-step enhancement base

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto dst = out.row(i);
        auto from = src.row(idx[i]);
        std::copy(from.begin(), from.end(), dst.begin());
    }
    return out;
}

}  // namespace

SyntheticTask generate_task(const SyntheticTaskConfig& cfg) {
    if (cfg.ambient_dim == 0) throw ConfigError("task.ambient_dim must be at least 1");
    if (cfg.train_pairs == 0) throw ConfigError("task.train_pairs must be at least 1");
    if (cfg.pairs < cfg.train_pairs + 2) {
        throw ConfigError("task.pairs must leave at least 2 test pairs after task.train_pairs");
    }

    Rng rng(cfg.seed);
    const std::size_t p = cfg.pairs;
    const std::size_t n = cfg.ambient_dim;

    // Draw order is part of the determinism contract:
    // A_x, A_y, B_x, B_y, Z, U_x, U_y, E_x, E_y (each row-major).
    Matrix x(p, n), y(p, n);
    if (cfg.latent_dim > 0) {
        const Matrix ax = gaussian_matrix(rng, n, cfg.latent_dim, 1.0);
        const Matrix ay = gaussian_matrix(rng, n, cfg.latent_dim, 1.0);
        Matrix bx, by;
        if (cfg.nuisance_dim > 0) {
            bx = gaussian_matrix(rng, n, cfg.nuisance_dim, 1.0);
            by = gaussian_matrix(rng, n, cfg.nuisance_dim, 1.0);
        }
        const Matrix z = gaussian_matrix(rng, p, cfg.latent_dim, 1.0);
        x = matmul(z, transpose(ax));
        y = matmul(z, transpose(ay));
        if (cfg.nuisance_dim > 0) {
            const Matrix ux = gaussian_matrix(rng, p, cfg.nuisance_dim, 1.0);
            const Matrix uy = gaussian_matrix(rng, p, cfg.nuisance_dim, 1.0);
            x = add(x, matmul(ux, transpose(bx)));
            y = add(y, matmul(uy, transpose(by)));
        }
    } else if (cfg.nuisance_dim > 0) {
        const Matrix bx = gaussian_matrix(rng, n, cfg.nuisance_dim, 1.0);
        const Matrix by = gaussian_matrix(rng, n, cfg.nuisance_dim, 1.0);
        const Matrix ux = gaussian_matrix(rng, p, cfg.nuisance_dim, 1.0);
        const Matrix uy = gaussian_matrix(rng, p, cfg.nuisance_dim, 1.0);
        x = matmul(ux, transpose(bx));
        y = matmul(uy, transpose(by));
    }
    // Ambient noise is always drawn so the stream layout does not depend
    // on noise_scale.
    const Matrix ex = gaussian_matrix(rng, p, n, 1.0);
    const Matrix ey = gaussian_matrix(rng, p, n, 1.0);
    x = add(x, scale(ex, cfg.noise_scale));
    y = add(y, scale(ey, cfg.noise_scale));

    SyntheticTask task;
    task.cfg = cfg;
    std::vector<std::size_t> train_idx(cfg.train_pairs), test_idx(p - cfg.train_pairs);
    std::iota(train_idx.begin(), train_idx.end(), 0);
    std::iota(test_idx.begin(), test_idx.end(), cfg.train_pairs);
    task.train_x = gather_rows(x, train_idx);
    task.train_y = gather_rows(y, train_idx);
    task.test_x = gather_rows(x, test_idx);
    task.test_y = gather_rows(y, test_idx);
    return task;
}

std::string to_string(LossMode mode) {
    switch (mode) {
        case LossMode::sde: return "sde";
        case LossMode::infonce_only: return "infonce_only";
        case LossMode::feat_plus_hellinger: return "feat_hellinger";
        case LossMode::feat_plus_subspace: return "feat_subspace";
    }
    return "?";
}

std::string to_string(EnhanceScope scope) {
    switch (scope) {
        case EnhanceScope::all: return "all";
        case EnhanceScope::strong_only: return "strong_only";
        case EnhanceScope::weak_only: return "weak_only";
        case EnhanceScope::noise_only: return "noise_only";
    }
    return "?";
}

std::string to_string(SvdGradMode mode) {
    return mode == SvdGradMode::straight_through ? "straight_through" : "full";
}

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "sde") return LossMode::sde;
    if (s == "infonce_only") return LossMode::infonce_only;
    if (s == "feat_hellinger") return LossMode::feat_plus_hellinger;
    if (s == "feat_subspace") return LossMode::feat_plus_subspace;
    throw ConfigError("unknown loss mode '" + s + "'");
}

EnhanceScope enhance_scope_from_string(const std::string& s) {
    if (s == "all") return EnhanceScope::all;
    if (s == "strong_only") return EnhanceScope::strong_only;
    if (s == "weak_only") return EnhanceScope::weak_only;
    if (s == "noise_only") return EnhanceScope::noise_only;
    throw ConfigError("unknown enhance scope '" + s + "'");
}

SvdGradMode svd_grad_from_string(const std::string& s) {
    if (s == "straight_through") return SvdGradMode::straight_through;
    if (s == "full") return SvdGradMode::full;
    throw ConfigError("unknown svd_grad mode '" + s + "'");
}

void mask_delta_scope(DeltaSpec& delta, const SubspacePartition& part, EnhanceScope scope) {
    if (scope == EnhanceScope::all) return;
    auto zero_indices = [&](const std::vector<std::size_t>& idx) {
        for (std::size_t i : idx) delta.deltas[i] = 0.0;
    };
    if (scope != EnhanceScope::strong_only) {
        zero_indices(part.strong);
        std::fill(delta.epsilon_draws.begin(), delta.epsilon_draws.end(), 0.0);
    }
    if (scope != EnhanceScope::weak_only) zero_indices(part.weak);
    if (scope != EnhanceScope::noise_only) zero_indices(part.noise);
}

TrainResult train(const SyntheticTask& task, const TrainConfig& cfg) {
    if (cfg.total_steps == 0) throw ConfigError("train.total_steps must be at least 1");
    if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
    if (cfg.batch_size > task.train_x.rows()) {
        throw ConfigError("train.batch_size exceeds the number of training pairs");
    }
    if (cfg.embed_dim == 0) throw ConfigError("train.embed_dim must be at least 1");
    if (!(cfg.tau > 0.0)) throw ConfigError("train.tau must be positive");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (cfg.alpha_override && *cfg.alpha_override < 0.0) {
        throw ConfigError("train.alpha_override must be >= 0");
    }
    if (cfg.lambda_override && *cfg.lambda_override < 0.0) {
        throw ConfigError("train.lambda_override must be >= 0");
    }

    const std::size_t ambient = task.train_x.cols();
    const Rng master(cfg.seed);

    Rng init_rng = master.fork(kTagInit);
    const double init_scale = 1.0 / std::sqrt(static_cast<double>(ambient));
    TrainResult result;
    result.params.wx = gaussian_matrix(init_rng, ambient, cfg.embed_dim, init_scale);
    result.params.wy = gaussian_matrix(init_rng, ambient, cfg.embed_dim, init_scale);

    Rng batch_rng = master.fork(kTagBatch);
    std::vector<std::size_t> pool(task.train_x.rows());
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::size_t> batch_idx(cfg.batch_size);

    result.log.reserve(cfg.total_steps);
    for (std::size_t t = 0; t < cfg.total_steps; ++t) {
        ScheduleState sched = ScheduleState::at(t, cfg.total_steps, cfg.batch_size);
        if (cfg.alpha_override) sched.alpha = *cfg.alpha_override;
        if (cfg.lambda_override) sched.lambda = *cfg.lambda_override;

        // Partial Fisher-Yates; consumes a fixed number of draws per step.
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
            const std::size_t j = i + batch_rng.next_below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            batch_idx[i] = pool[i];
        }

        const Matrix xraw = gather_rows(task.train_x, batch_idx);
        const Matrix yraw = gather_rows(task.train_y, batch_idx);
        Matrix x = matmul(xraw, result.params.wx);
        Matrix y = matmul(yraw, result.params.wy);
        // Non-finite entries or norm overflow both count as divergence.
        if (!std::isfinite(frobenius_norm(x)) || !std::isfinite(frobenius_norm(y))) {
            throw TrainingError("training diverged (non-finite embeddings)", t);
        }

        const bool enhancement_on = cfg.mode != LossMode::infonce_only && sched.alpha != 0.0;
        Matrix xe = x, ye = y;
        std::optional<DeltaSpec> delta_x, delta_y;
        if (enhancement_on) {
            const SpectralDecomposition dec_x = svd(x);
            const SpectralDecomposition dec_y = svd(y);
            SubspacePartition part_x = partition(dec_x, x.rows(), x.cols());
            SubspacePartition part_y = partition(dec_y, y.rows(), y.cols());
            Rng enh_x = master.fork(kTagEnhance ^ Rng::mix64(2 * t));
            Rng enh_y = master.fork(kTagEnhance ^ Rng::mix64(2 * t + 1));
            delta_x = build_delta(dec_x, part_x, sched.alpha, enh_x);
            delta_y = build_delta(dec_y, part_y, sched.alpha, enh_y);
            mask_delta_scope(*delta_x, part_x, cfg.scope);
            mask_delta_scope(*delta_y, part_y, cfg.scope);
            xe = enhance(x, *delta_x, dec_x);
            ye = enhance(y, *delta_y, dec_y);
        }

        LossReport report;
        report.tau = cfg.tau;
        report.lambda = sched.lambda;
        report.feat = infonce(xe, ye, cfg.tau);

        GradPair grad = grad_infonce(xe, ye, cfg.tau);

        const bool spectral_on = cfg.mode != LossMode::infonce_only && sched.lambda != 0.0;
        if (spectral_on) {
            const SpectralDecomposition dec_xe = svd(xe);
            const SpectralDecomposition dec_ye = svd(ye);
            std::size_t k = cfg.k;
            if (k == 0) {
                const SubspacePartition pxe = partition(dec_xe, xe.rows(), xe.cols());
                const SubspacePartition pye = partition(dec_ye, ye.rows(), ye.cols());
                k = default_subspace_k(pxe, pye, dec_xe.rank, dec_ye.rank);
            }
            k = std::min({k, dec_xe.rank, dec_ye.rank});
            report.k = k;

            const std::size_t r = std::max(dec_xe.rank, dec_ye.rank);
            const std::vector<double> w = linear_decay_weights(r);
            const bool use_hell = cfg.mode != LossMode::feat_plus_subspace;
            const bool use_sub = cfg.mode != LossMode::feat_plus_hellinger;
            if (use_hell) report.hellinger = hellinger_loss(dec_xe.sigma, dec_ye.sigma, w);
            if (use_sub) {
                report.subspace =
                    subspace_loss(left_columns(dec_xe.v, k), left_columns(dec_ye.v, k));
            }
            report.spec = spec_loss(report.hellinger, report.subspace);

            try {
                const GradPair gs =
                    grad_spectral(dec_xe, dec_ye, k, w, cfg.svd_grad, use_hell, use_sub);
                grad.dx = add(grad.dx, scale(gs.dx, sched.lambda));
                grad.dy = add(grad.dy, scale(gs.dy, sched.lambda));
            } catch (const DegenerateGapError&) {
                // Near-degenerate spectrum: skip the spectral gradient for
                // this step (the loss value is still reported).
            }
        }
        report.total = report.feat + report.lambda * report.spec;

        if (!std::isfinite(report.total)) {
            throw TrainingError("training diverged (non-finite loss)", t);
        }

        const Matrix dwx = matmul(transpose(xraw), grad.dx);
        const Matrix dwy = matmul(transpose(yraw), grad.dy);
        result.params.wx = sub(result.params.wx, scale(dwx, cfg.learning_rate));
        result.params.wy = sub(result.params.wy, scale(dwy, cfg.learning_rate));

        result.log.push_back({sched, report});
        if (cfg.capture_step && *cfg.capture_step == t) {
            CapturedStep cap;
            cap.step = t;
            cap.x = x;
            cap.y = y;
            cap.delta_x = delta_x;
            cap.delta_y = delta_y;
            cap.loss = report;
            result.captured = cap;
        }
    }
    return result;
}

double precision_at_1(const EncoderParams& params, const Matrix& test_x, const Matrix& test_y) {
    if (test_x.rows() != test_y.rows()) throw DimensionError("precision_at_1: pair count mismatch");
    if (test_x.rows() < 2) throw RangeError("precision_at_1 needs at least 2 test pairs");
    const Matrix ex = matmul(test_x, params.wx);
    const Matrix ey = matmul(test_y, params.wy);

    const std::size_t p = ex.rows();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < p; ++i) {
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double s = cosine(ex.row(i), ey.row(j));
            if (s > best_sim) {  // strict: ties keep the lowest index
                best_sim = s;
                best = j;
            }
        }
        if (best == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(p);
}

double perturbed_eval(const EncoderParams& params, const Matrix& test_x, const Matrix& test_y,
                      double fraction, Rng& rng) {
    if (!(fraction >= 0.0) || fraction > 1.0) {
        throw RangeError("perturbed_eval fraction must lie in [0, 1]");
    }
    if (test_x.rows() != test_y.rows()) throw DimensionError("perturbed_eval: pair count mismatch");
    if (test_x.rows() < 2) throw RangeError("perturbed_eval needs at least 2 test pairs");

    const Matrix ex = matmul(test_x, params.wx);
    Matrix ey = matmul(test_y, params.wy);
    const std::size_t p = ey.rows();
    const std::size_t cnt = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(p)));

    if (cnt > 0) {
        std::vector<std::size_t> pool(p);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < cnt; ++i) {
            const std::size_t j = i + rng.next_below(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        const std::size_t d = ey.cols();
        for (std::size_t i = 0; i < cnt; ++i) {
            const Matrix q = random_orthogonal(rng, d);
            auto row = ey.row(pool[i]);
            std::vector<double> rotated(d, 0.0);
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = 0; b < d; ++b) rotated[b] += row[a] * q(a, b);
            }
            std::copy(rotated.begin(), rotated.end(), row.begin());
        }
    }

    std::size_t hits = 0;
    for (std::size_t i = 0; i < p; ++i) {
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double s = cosine(ex.row(i), ey.row(j));
            if (s > best_sim) {
                best_sim = s;
                best = j;
            }
        }
        if (best == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(p);
}

std::vector<AblationRow> ablation_suite(const SyntheticTaskConfig& task_cfg,
                                        const TrainConfig& base,
                                        std::span<const std::uint64_t> seeds,
                                        double perturb_fraction, std::size_t workers) {
    struct GridEntry {
        std::string label;
        LossMode mode;
        EnhanceScope scope;
    };
    const std::vector<GridEntry> grid = {
        {"infonce_only", LossMode::infonce_only, EnhanceScope::all},
        {"feat_hellinger", LossMode::feat_plus_hellinger, EnhanceScope::all},
        {"feat_subspace", LossMode::feat_plus_subspace, EnhanceScope::all},
        {"sde", LossMode::sde, EnhanceScope::all},
        {"sde_strong_only", LossMode::sde, EnhanceScope::strong_only},
        {"sde_weak_only", LossMode::sde, EnhanceScope::weak_only},
        {"sde_noise_only", LossMode::sde, EnhanceScope::noise_only},
    };

    std::vector<AblationRow> rows(grid.size() * seeds.size());
    auto run_one = [&](std::size_t flat) {
        const GridEntry& entry = grid[flat / seeds.size()];
        const std::uint64_t seed = seeds[flat % seeds.size()];

        SyntheticTaskConfig tc = task_cfg;
        tc.seed = seed;
        const SyntheticTask task = generate_task(tc);

        TrainConfig cfg = base;
        cfg.mode = entry.mode;
        cfg.scope = entry.scope;
        cfg.seed = seed;
        const TrainResult trained = train(task, cfg);

        AblationRow row;
        row.mode = entry.label;
        row.seed = seed;
        row.clean_p1 = precision_at_1(trained.params, task.test_x, task.test_y);
        Rng eval_rng = Rng(seed).fork(0x6576616c);  // paired across modes
        row.perturbed_p1 =
            perturbed_eval(trained.params, task.test_x, task.test_y, perturb_fraction, eval_rng);
        row.final_feat = trained.log.back().loss.feat;
        row.final_spec = trained.log.back().loss.spec;
        rows[flat] = row;
    };

    const std::size_t total = rows.size();
    if (workers <= 1) {
        for (std::size_t i = 0; i < total; ++i) run_one(i);
    } else {
        std::vector<std::thread> pool;
        const std::size_t nw = std::min(workers, total);
        for (std::size_t w = 0; w < nw; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < total; i += nw) run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    return rows;
}

std::string ablation_table_csv(std::span<const AblationRow> rows) {
    std::string out = "mode,seed,clean_p1,perturbed_p1,final_feat,final_spec\n";
    for (const AblationRow& r : rows) {
        out += r.mode + "," + std::to_string(r.seed) + "," + format_double(r.clean_p1) + "," +
               format_double(r.perturbed_p1) + "," + format_double(r.final_feat) + "," +
               format_double(r.final_spec) + "\n";
    }
    return out;
}

}  // namespace sde
