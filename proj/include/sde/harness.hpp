#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sde/enhance.hpp"
#include "sde/gradcheck.hpp"
#include "sde/losses.hpp"
#include "sde/matrix.hpp"
#include "sde/spectral.hpp"

namespace sde {

/// Paired-modality synthetic data: x = A_x z + B_x u_x + eta_x and
/// y = A_y z + B_y u_y + eta_y share the latent z, so the pairing is
/// recoverable in principle whenever latent_dim > 0.
struct SyntheticTaskConfig {
    std::size_t latent_dim = 8;
    std::size_t nuisance_dim = 8;
    std::size_t ambient_dim = 48;
    std::size_t pairs = 384;
    std::size_t train_pairs = 256;
    double noise_scale = 0.5;
    std::uint64_t seed = 1;
};

struct SyntheticTask {
    SyntheticTaskConfig cfg;
    Matrix train_x, train_y;  // train_pairs x ambient_dim
    Matrix test_x, test_y;    // (pairs - train_pairs) x ambient_dim
};

SyntheticTask generate_task(const SyntheticTaskConfig& cfg);

/// Linear encoders, one per modality.
struct EncoderParams {
    Matrix wx;  // ambient_dim x embed_dim
    Matrix wy;
};

enum class LossMode { sde, infonce_only, feat_plus_hellinger, feat_plus_subspace };
enum class EnhanceScope { all, strong_only, weak_only, noise_only };

std::string to_string(LossMode mode);
std::string to_string(EnhanceScope scope);
std::string to_string(SvdGradMode mode);
LossMode loss_mode_from_string(const std::string& s);
EnhanceScope enhance_scope_from_string(const std::string& s);
SvdGradMode svd_grad_from_string(const std::string& s);

struct TrainConfig {
    std::size_t total_steps = 500;
    std::size_t batch_size = 32;
    std::size_t embed_dim = 32;
    double tau = 0.02;
    double learning_rate = 0.05;
    std::size_t k = 0;  // 0 = adaptive min(|S_x|, |S_y|, 8)
    LossMode mode = LossMode::sde;
    EnhanceScope scope = EnhanceScope::all;
    SvdGradMode svd_grad = SvdGradMode::straight_through;
    std::uint64_t seed = 1;
    std::optional<double> alpha_override;
    std::optional<double> lambda_override;
    std::optional<std::size_t> capture_step;
};

struct StepRecord {
    ScheduleState schedule;
    LossReport loss;
};

/// Everything needed to replay one training step bit-for-bit.
struct CapturedStep {
    std::size_t step = 0;
    Matrix x, y;  // encoded batches before enhancement
    std::optional<DeltaSpec> delta_x, delta_y;
    LossReport loss;
};

struct TrainResult {
    EncoderParams params;
    std::vector<StepRecord> log;
    std::optional<CapturedStep> captured;
};

/// Full training loop: encode batch, enhance per schedule, dual-domain
/// loss, plain gradient descent. infonce_only is the unenhanced baseline.
/// Loss divergence throws TrainingError with the step index.
TrainResult train(const SyntheticTask& task, const TrainConfig& cfg);

/// Zeroes perturbations outside the selected subspace (epsilon records for
/// masked strong indices are zeroed too, keeping delta = alpha*gamma*eps).
void mask_delta_scope(DeltaSpec& delta, const SubspacePartition& part, EnhanceScope scope);

/// Fraction of test queries whose true partner ranks first by cosine among
/// all test targets; ties broken by lowest candidate index.
double precision_at_1(const EncoderParams& params, const Matrix& test_x, const Matrix& test_y);

/// Precision@1 after rotating the embeddings of round(fraction * P)
/// randomly chosen targets by independent random orthogonal maps.
double perturbed_eval(const EncoderParams& params, const Matrix& test_x, const Matrix& test_y,
                      double fraction, Rng& rng);

struct AblationRow {
    std::string mode;
    std::uint64_t seed = 0;
    double clean_p1 = 0.0;
    double perturbed_p1 = 0.0;
    double final_feat = 0.0;
    double final_spec = 0.0;
};

/// All four loss modes plus the three single-subspace enhancement modes,
/// each trained per seed with paired evaluation RNG. `workers` > 1 fans
/// runs out across threads; rows always come back in grid order
/// (mode-major, then seed).
std::vector<AblationRow> ablation_suite(const SyntheticTaskConfig& task_cfg,
                                        const TrainConfig& base,
                                        std::span<const std::uint64_t> seeds,
                                        double perturb_fraction, std::size_t workers);

/// CSV table with header mode,seed,clean_p1,perturbed_p1,final_feat,final_spec.
std::string ablation_table_csv(std::span<const AblationRow> rows);

}  // namespace sde
