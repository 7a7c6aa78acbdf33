#include "sde/serialize.hpp"

#include "sde/errors.hpp"

namespace sde {

namespace {

template <typename T>
T get_field(const Json& j, const std::string& section, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        if (j.at(key).is_null()) return fallback;
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("bad value for key '" + section + "." + key + "'");
    }
}

void reject_unknown(const Json& j, const std::string& section,
                    std::initializer_list<const char*> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool found = false;
        for (const char* k : known) {
            if (it.key() == k) {
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("unknown key '" + section + "." + it.key() + "'");
    }
}

}  // namespace

Json delta_spec_to_json(const DeltaSpec& d) {
    return Json{{"deltas", d.deltas},
                {"gamma_noise", d.gamma_noise},
                {"epsilon_draws", d.epsilon_draws}};
}

DeltaSpec delta_spec_from_json(const Json& j) {
    DeltaSpec d;
    try {
        d.deltas = j.at("deltas").get<std::vector<double>>();
        d.gamma_noise = j.at("gamma_noise").get<double>();
        d.epsilon_draws = j.at("epsilon_draws").get<std::vector<double>>();
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed DeltaSpec JSON: ") + e.what());
    }
    return d;
}

Json loss_report_to_json(const LossReport& r) {
    return Json{{"feat", r.feat},     {"hellinger", r.hellinger}, {"subspace", r.subspace},
                {"spec", r.spec},     {"lambda", r.lambda},       {"total", r.total},
                {"tau", r.tau},       {"k", r.k}};
}

Json step_record_to_json(const StepRecord& s) {
    Json j = loss_report_to_json(s.loss);
    j["step"] = s.schedule.step;
    j["progress"] = s.schedule.progress;
    j["alpha"] = s.schedule.alpha;
    j["beta"] = s.schedule.beta;
    j["batch_size"] = s.schedule.batch_size;
    return j;
}

Json partition_report_to_json(const SubspacePartition& part, const SpectralReport& rep) {
    auto one_based = [](const std::vector<std::size_t>& v) {
        std::vector<std::size_t> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] + 1;
        return out;
    };
    return Json{
        {"strong", one_based(part.strong)},
        {"weak", one_based(part.weak)},
        {"noise", one_based(part.noise)},
        {"counts", {rep.strong_count, rep.weak_count, rep.noise_count}},
        {"proportions", {rep.strong_proportion, rep.weak_proportion, rep.noise_proportion}},
        {"energy_fractions", {rep.strong_energy, rep.weak_energy, rep.noise_energy}},
        {"cumulative_energy", rep.cumulative_energy},
        {"noise_edge", rep.noise_edge},
        {"strong_threshold", rep.strong_threshold},
        {"vartheta", rep.vartheta},
    };
}

Json grad_summary_to_json(const GradcheckSummary& s) {
    return Json{{"pass", s.pass},
                {"infonce_max_rel_error", s.infonce_max_rel},
                {"spectral_max_rel_error", s.spectral_max_rel},
                {"sigma_identity_max_error", s.sigma_identity_max_err},
                {"equivariance_max_error", s.equivariance_max_err},
                {"instances", s.instances}};
}

Json train_config_to_json(const TrainConfig& cfg) {
    Json j{{"total_steps", cfg.total_steps},
           {"batch_size", cfg.batch_size},
           {"embed_dim", cfg.embed_dim},
           {"tau", cfg.tau},
           {"learning_rate", cfg.learning_rate},
           {"k", cfg.k},
           {"mode", to_string(cfg.mode)},
           {"enhance_scope", to_string(cfg.scope)},
           {"svd_grad", to_string(cfg.svd_grad)},
           {"seed", cfg.seed}};
    j["alpha_override"] = cfg.alpha_override ? Json(*cfg.alpha_override) : Json(nullptr);
    j["lambda_override"] = cfg.lambda_override ? Json(*cfg.lambda_override) : Json(nullptr);
    return j;
}

Json task_config_to_json(const SyntheticTaskConfig& cfg) {
    return Json{{"latent_dim", cfg.latent_dim},   {"nuisance_dim", cfg.nuisance_dim},
                {"ambient_dim", cfg.ambient_dim}, {"pairs", cfg.pairs},
                {"train_pairs", cfg.train_pairs}, {"noise_scale", cfg.noise_scale},
                {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("'train' section must be an object");
    reject_unknown(j, "train",
                   {"total_steps", "batch_size", "embed_dim", "tau", "learning_rate", "k", "mode",
                    "enhance_scope", "svd_grad", "seed", "alpha_override", "lambda_override"});
    TrainConfig cfg;
    cfg.total_steps = get_field<std::size_t>(j, "train", "total_steps", cfg.total_steps);
    cfg.batch_size = get_field<std::size_t>(j, "train", "batch_size", cfg.batch_size);
    cfg.embed_dim = get_field<std::size_t>(j, "train", "embed_dim", cfg.embed_dim);
    cfg.tau = get_field<double>(j, "train", "tau", cfg.tau);
    cfg.learning_rate = get_field<double>(j, "train", "learning_rate", cfg.learning_rate);
    cfg.k = get_field<std::size_t>(j, "train", "k", cfg.k);
    cfg.mode = loss_mode_from_string(get_field<std::string>(j, "train", "mode", to_string(cfg.mode)));
    cfg.scope = enhance_scope_from_string(
        get_field<std::string>(j, "train", "enhance_scope", to_string(cfg.scope)));
    cfg.svd_grad =
        svd_grad_from_string(get_field<std::string>(j, "train", "svd_grad", to_string(cfg.svd_grad)));
    cfg.seed = get_field<std::uint64_t>(j, "train", "seed", cfg.seed);
    if (j.contains("alpha_override") && !j.at("alpha_override").is_null()) {
        cfg.alpha_override = get_field<double>(j, "train", "alpha_override", 0.0);
    }
    if (j.contains("lambda_override") && !j.at("lambda_override").is_null()) {
        cfg.lambda_override = get_field<double>(j, "train", "lambda_override", 0.0);
    }
    return cfg;
}

SyntheticTaskConfig task_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("'task' section must be an object");
    reject_unknown(j, "task",
                   {"latent_dim", "nuisance_dim", "ambient_dim", "pairs", "train_pairs",
                    "noise_scale", "seed"});
    SyntheticTaskConfig cfg;
    cfg.latent_dim = get_field<std::size_t>(j, "task", "latent_dim", cfg.latent_dim);
    cfg.nuisance_dim = get_field<std::size_t>(j, "task", "nuisance_dim", cfg.nuisance_dim);
    cfg.ambient_dim = get_field<std::size_t>(j, "task", "ambient_dim", cfg.ambient_dim);
    cfg.pairs = get_field<std::size_t>(j, "task", "pairs", cfg.pairs);
    cfg.train_pairs = get_field<std::size_t>(j, "task", "train_pairs", cfg.train_pairs);
    cfg.noise_scale = get_field<double>(j, "task", "noise_scale", cfg.noise_scale);
    cfg.seed = get_field<std::uint64_t>(j, "task", "seed", cfg.seed);
    return cfg;
}

}  // namespace sde
