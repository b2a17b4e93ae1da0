#include "votetok/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "votetok/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace votetok {

namespace {

// Typed section reader that records violations and tracks consumed keys so
// unknown ones can be enumerated afterwards.
class Section {
public:
    Section(const json* j, std::string prefix, std::vector<std::string>* out)
        : j_(j), prefix_(std::move(prefix)), out_(out) {}

    const json* find(const std::string& key) {
        used_.insert(key);
        if (!j_ || !j_->contains(key)) return nullptr;
        return &j_->at(key);
    }

    int64_t get_int(const std::string& key, int64_t def, int64_t lo, int64_t hi) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_integer()) {
            fail(key, "must be an integer");
            return def;
        }
        const int64_t x = v->get<int64_t>();
        if (x < lo || x > hi) {
            fail(key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            return def;
        }
        return x;
    }

    double get_double(const std::string& key, double def, double lo, double hi) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number()) {
            fail(key, "must be a number");
            return def;
        }
        const double x = v->get<double>();
        if (!(x >= lo && x <= hi)) {
            fail(key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            return def;
        }
        return x;
    }

    bool get_bool(const std::string& key, bool def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_boolean()) {
            fail(key, "must be a boolean");
            return def;
        }
        return v->get<bool>();
    }

    uint64_t get_u64(const std::string& key, uint64_t def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_unsigned() && !v->is_number_integer()) {
            fail(key, "must be an unsigned integer");
            return def;
        }
        return v->get<uint64_t>();
    }

    std::string get_string(const std::string& key, const std::string& def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_string()) {
            fail(key, "must be a string");
            return def;
        }
        return v->get<std::string>();
    }

    void fail(const std::string& key, const std::string& why) {
        out_->push_back(prefix_ + key + ": " + why);
    }

    void finish() {
        if (!j_) return;
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            if (!used_.count(it.key())) out_->push_back(prefix_ + it.key() + ": unknown key");
        }
    }

private:
    const json* j_;
    std::string prefix_;
    std::vector<std::string>* out_;
    std::set<std::string> used_;
};

PerturbationSpec parse_spec_entry(const json& e, const std::string& prefix,
                                  std::vector<std::string>& violations) {
    PerturbationSpec spec;
    Section s(&e, prefix, &violations);
    const std::string kind_str = s.get_string("kind", "");
    const json* intensity = s.find("intensity");
    spec.noise_pool = s.get_string("noise_pool", "");
    s.finish();

    try {
        spec.kind = perturbation_kind_from_string(kind_str);
    } catch (const std::exception&) {
        violations.push_back(prefix + "kind: must be one of gaussian|pink|brown|bitcrush|real");
        return spec;
    }
    if (!intensity) {
        violations.push_back(prefix + "intensity: required");
        return spec;
    }
    if (intensity->is_number()) {
        spec.intensity_lo = spec.intensity_hi = intensity->get<double>();
    } else if (intensity->is_array() && intensity->size() == 2 && (*intensity)[0].is_number() &&
               (*intensity)[1].is_number()) {
        spec.intensity_lo = (*intensity)[0].get<double>();
        spec.intensity_hi = (*intensity)[1].get<double>();
    } else {
        violations.push_back(prefix + "intensity: must be a number or [low, high]");
        return spec;
    }
    try {
        spec.validate();
    } catch (const std::exception& ex) {
        violations.push_back(prefix + std::string(ex.what()));
    }
    return spec;
}

json spec_to_json(const PerturbationSpec& spec) {
    json e = {{"kind", to_string(spec.kind)}};
    if (spec.intensity_lo == spec.intensity_hi) {
        e["intensity"] = spec.intensity_lo;
    } else {
        e["intensity"] = {spec.intensity_lo, spec.intensity_hi};
    }
    if (!spec.noise_pool.empty()) e["noise_pool"] = spec.noise_pool;
    return e;
}

bool pool_has_clips(const std::string& dir) {
    if (!fs::is_directory(dir)) return false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".wav") return true;
    }
    return false;
}

std::string now_utc_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         std::vector<std::string>& violations) {
    ExperimentConfig cfg;
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        violations.push_back(std::string("invalid JSON: ") + e.what());
        return cfg;
    }
    if (!root.is_object()) {
        violations.push_back("config root must be a JSON object");
        return cfg;
    }

    Section top(&root, "", &violations);
    cfg.seed = top.get_u64("seed", 1);
    cfg.out_dir = top.get_string("out_dir", "out");

    {
        Section s(top.find("corpus"), "corpus.", &violations);
        cfg.corpus.n_utterances = static_cast<int>(s.get_int("n_utterances", 2000, 1, 1000000));
        cfg.corpus.alphabet_size = static_cast<int>(s.get_int("alphabet_size", 16, 2, 4096));
        cfg.corpus.segment_frames = static_cast<int>(s.get_int("segment_frames", 6, 1, 1000));
        cfg.corpus.symbols_per_utterance =
            static_cast<int>(s.get_int("symbols_per_utterance", 6, 1, 1000));
        cfg.corpus.sample_rate_hz = static_cast<int>(s.get_int("sample_rate_hz", 16000, 1000, 192000));
        cfg.n_eval_utterances = static_cast<int>(s.get_int("n_eval_utterances", 200, 1, 1000000));
        s.finish();
    }
    cfg.corpus.seed = cfg.seed;  // replaced by derived seeds at run time

    {
        Section s(top.find("features"), "features.", &violations);
        cfg.features.frame_len_samples = static_cast<int>(s.get_int("frame_len_samples", 400, 2, 65536));
        cfg.features.hop_samples = static_cast<int>(s.get_int("hop_samples", 160, 1, 65536));
        cfg.features.n_bands = static_cast<int>(s.get_int("n_bands", 20, 1, 512));
        s.finish();
        if (cfg.features.hop_samples > cfg.features.frame_len_samples)
            violations.push_back("features.hop_samples: must be <= frame_len_samples");
    }

    {
        Section s(top.find("model"), "model.", &violations);
        cfg.model.encoder_hidden = static_cast<int>(s.get_int("encoder_hidden", 64, 1, 65536));
        cfg.model.hidden_dim = static_cast<int>(s.get_int("hidden_dim", 48, 1, 65536));
        cfg.model.pool_factor = static_cast<int>(s.get_int("pool_factor", 2, 1, 64));
        cfg.model.quantizer.n_branches = static_cast<int>(s.get_int("n_branches", 5, 1, 99));
        cfg.model.quantizer.code_dim = static_cast<int>(s.get_int("code_dim", 8, 1, 30));
        cfg.model.quantizer.ste_clip = s.get_bool("ste_clip", false);
        s.finish();
        if (cfg.model.quantizer.n_branches % 2 == 0)
            violations.push_back("model.n_branches: must be odd");
    }
    cfg.model.feature_dim = cfg.features.n_bands;
    cfg.model.quantizer.hidden_dim = cfg.model.hidden_dim;
    cfg.model.n_classes = cfg.corpus.alphabet_size;

    {
        Section s(top.find("noise_aware"), "noise_aware.", &violations);
        cfg.noise_aware.enabled = s.get_bool("enabled", true);
        const json* specs = s.find("specs");
        if (specs && !(specs->is_string() && specs->get<std::string>() == "default")) {
            if (!specs->is_array()) {
                violations.push_back("noise_aware.specs: must be \"default\" or a list");
            } else {
                cfg.noise_specs_default = false;
                for (size_t i = 0; i < specs->size(); ++i)
                    cfg.noise_aware.specs.push_back(parse_spec_entry(
                        (*specs)[i], "noise_aware.specs[" + std::to_string(i) + "].", violations));
                if (cfg.noise_aware.specs.empty())
                    violations.push_back("noise_aware.specs: must not be empty");
            }
        }
        s.finish();
    }

    {
        Section s(top.find("loss_weights"), "loss_weights.", &violations);
        cfg.loss_weights.consensus = s.get_double("consensus", 0.25, 0.0, 1e6);
        cfg.loss_weights.commitment = s.get_double("commitment", 0.25, 0.0, 1e6);
        cfg.loss_weights.codebook_entropy = s.get_double("codebook_entropy", 1.0, 0.0, 1e6);
        s.finish();
    }

    {
        Section s(top.find("optim"), "optim.", &violations);
        cfg.train_options.optim.lr = s.get_double("lr", 1e-3, 1e-12, 10.0);
        cfg.train_options.optim.beta1 = s.get_double("beta1", 0.9, 0.0, 0.9999999);
        cfg.train_options.optim.beta2 = s.get_double("beta2", 0.999, 0.0, 0.9999999);
        cfg.train_options.optim.eps = s.get_double("eps", 1e-8, 1e-16, 1.0);
        cfg.train_options.optim.weight_decay = s.get_double("weight_decay", 0.01, 0.0, 10.0);
        cfg.train_options.optim.grad_clip = s.get_double("grad_clip", 1.0, 0.0, 1e6);
        s.finish();
    }

    {
        Section s(top.find("train"), "train.", &violations);
        cfg.train_options.epochs = static_cast<int>(s.get_int("epochs", 4, 0, 100000));
        cfg.train_options.batch_size = static_cast<int>(s.get_int("batch_size", 8, 1, 100000));
        cfg.train_options.warmup_steps = static_cast<int>(s.get_int("warmup_steps", 100, 0, 10000000));
        cfg.train_options.val_fraction = s.get_double("val_fraction", 0.1, 0.0, 0.999);
        s.finish();
    }

    {
        Section s(top.find("eval"), "eval.", &violations);
        cfg.eval_workers = static_cast<int>(s.get_int("workers", 1, 1, 256));
        const json* suite = s.find("suite");
        if (suite && !(suite->is_string() && suite->get<std::string>() == "default")) {
            if (!suite->is_array()) {
                violations.push_back("eval.suite: must be \"default\" or a list");
            } else {
                cfg.eval_suite_default = false;
                for (size_t i = 0; i < suite->size(); ++i) {
                    const std::string prefix = "eval.suite[" + std::to_string(i) + "].";
                    Section row(&(*suite)[i], prefix, &violations);
                    EvalCase ec;
                    ec.name = row.get_string("name", "case" + std::to_string(i));
                    json entry = (*suite)[i];
                    entry.erase("name");
                    ec.spec = parse_spec_entry(entry, prefix, violations);
                    if (ec.spec.intensity_lo != ec.spec.intensity_hi)
                        violations.push_back(prefix + "intensity: eval rows use a fixed intensity");
                    cfg.eval_suite.push_back(std::move(ec));
                }
                if (cfg.eval_suite.empty()) violations.push_back("eval.suite: must not be empty");
            }
        }
        s.finish();
    }

    {
        Section s(top.find("noise_pools"), "noise_pools.", &violations);
        cfg.pools.generate = s.get_bool("generate", true);
        cfg.pools.train_dir = s.get_string("train_dir", "");
        cfg.pools.ood_dir = s.get_string("ood_dir", "");
        cfg.pools.n_train_clips = static_cast<int>(s.get_int("n_train_clips", 24, 1, 10000));
        cfg.pools.n_ood_clips = static_cast<int>(s.get_int("n_ood_clips", 12, 1, 10000));
        s.finish();
    }

    top.finish();

    if (violations.empty()) {
        // Cross-checks that need a fully assembled config.
        try {
            cfg.corpus.validate();
            cfg.features.validate();
            cfg.model.validate();
            cfg.loss_weights.validate();
        } catch (const std::exception& ex) {
            violations.push_back(ex.what());
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path, std::vector<std::string>& violations) {
    std::ifstream in(path);
    if (!in) {
        violations.push_back("cannot open config file: " + path);
        return {};
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text, violations);
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
    json specs = json::array();
    for (const auto& s : cfg.noise_aware.specs) specs.push_back(spec_to_json(s));
    json suite = json::array();
    for (const auto& ec : cfg.eval_suite) {
        json row = spec_to_json(ec.spec);
        row["name"] = ec.name;
        suite.push_back(row);
    }
    const json j = {
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir},
        {"corpus",
         {{"n_utterances", cfg.corpus.n_utterances},
          {"alphabet_size", cfg.corpus.alphabet_size},
          {"segment_frames", cfg.corpus.segment_frames},
          {"symbols_per_utterance", cfg.corpus.symbols_per_utterance},
          {"sample_rate_hz", cfg.corpus.sample_rate_hz},
          {"n_eval_utterances", cfg.n_eval_utterances}}},
        {"features",
         {{"frame_len_samples", cfg.features.frame_len_samples},
          {"hop_samples", cfg.features.hop_samples},
          {"n_bands", cfg.features.n_bands}}},
        {"model",
         {{"encoder_hidden", cfg.model.encoder_hidden},
          {"hidden_dim", cfg.model.hidden_dim},
          {"pool_factor", cfg.model.pool_factor},
          {"n_branches", cfg.model.quantizer.n_branches},
          {"code_dim", cfg.model.quantizer.code_dim},
          {"ste_clip", cfg.model.quantizer.ste_clip}}},
        {"noise_aware", {{"enabled", cfg.noise_aware.enabled}, {"specs", specs}}},
        {"loss_weights",
         {{"consensus", cfg.loss_weights.consensus},
          {"commitment", cfg.loss_weights.commitment},
          {"codebook_entropy", cfg.loss_weights.codebook_entropy}}},
        {"optim",
         {{"lr", cfg.train_options.optim.lr},
          {"beta1", cfg.train_options.optim.beta1},
          {"beta2", cfg.train_options.optim.beta2},
          {"eps", cfg.train_options.optim.eps},
          {"weight_decay", cfg.train_options.optim.weight_decay},
          {"grad_clip", cfg.train_options.optim.grad_clip}}},
        {"train",
         {{"epochs", cfg.train_options.epochs},
          {"batch_size", cfg.train_options.batch_size},
          {"warmup_steps", cfg.train_options.warmup_steps},
          {"val_fraction", cfg.train_options.val_fraction}}},
        {"eval", {{"suite", suite}, {"workers", cfg.eval_workers}}},
        {"noise_pools",
         {{"generate", cfg.pools.generate},
          {"train_dir", cfg.pools.train_dir},
          {"ood_dir", cfg.pools.ood_dir},
          {"n_train_clips", cfg.pools.n_train_clips},
          {"n_ood_clips", cfg.pools.n_ood_clips}}},
    };
    return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = experiment_config_json(cfg);
    uint64_t h = 14695981039346656037ull;
    for (char c : text) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void resolve_noise_pools(ExperimentConfig& cfg) {
    if (cfg.pools.generate) {
        if (cfg.pools.train_dir.empty())
            cfg.pools.train_dir = (fs::path(cfg.out_dir) / "noise_pools" / "train").string();
        if (cfg.pools.ood_dir.empty())
            cfg.pools.ood_dir = (fs::path(cfg.out_dir) / "noise_pools" / "ood").string();
        if (!pool_has_clips(cfg.pools.train_dir))
            synth_noise_pool(cfg.pools.train_dir, cfg.pools.n_train_clips,
                             derive_seed(cfg.seed, "noise-pool-train"), NoisePoolFlavor::kAmbient,
                             cfg.corpus.sample_rate_hz);
        if (!pool_has_clips(cfg.pools.ood_dir))
            synth_noise_pool(cfg.pools.ood_dir, cfg.pools.n_ood_clips,
                             derive_seed(cfg.seed, "noise-pool-ood"), NoisePoolFlavor::kEvents,
                             cfg.corpus.sample_rate_hz);
    }
    if (cfg.noise_specs_default)
        cfg.noise_aware.specs = default_training_specs(cfg.pools.train_dir);
    else
        for (auto& spec : cfg.noise_aware.specs)
            if (spec.kind == PerturbationKind::kRealNoise && spec.noise_pool.empty())
                spec.noise_pool = cfg.pools.train_dir;
    if (cfg.eval_suite_default)
        cfg.eval_suite = default_eval_suite(cfg.pools.train_dir, cfg.pools.ood_dir);
}

void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& outputs) {
    fs::create_directories(cfg.out_dir);
    const json j = {
        {"command", command},       {"config_hash", config_hash(cfg)},
        {"seed", cfg.seed},         {"version", kVersion},
        {"timestamp", now_utc_iso8601()}, {"outputs", outputs},
    };
    std::ofstream out(fs::path(cfg.out_dir) / (command + "_manifest.json"));
    out << j.dump(2) << "\n";
}

std::vector<Utterance> make_train_corpus(const ExperimentConfig& cfg) {
    CorpusSpec spec = cfg.corpus;
    spec.seed = derive_seed(cfg.seed, "corpus");
    return synth_corpus(spec, cfg.features);
}

std::vector<Utterance> make_eval_corpus(const ExperimentConfig& cfg) {
    CorpusSpec spec = cfg.corpus;
    spec.n_utterances = cfg.n_eval_utterances;
    spec.seed = derive_seed(cfg.seed, "eval-corpus");
    return synth_corpus(spec, cfg.features);
}

TrainArtifacts run_training(const ExperimentConfig& cfg) {
    TrainArtifacts art{Model::init(cfg.model, derive_seed(cfg.seed, "init")), {}};
    const auto corpus = make_train_corpus(cfg);
    TrainOptions opts = cfg.train_options;
    opts.seed = derive_seed(cfg.seed, "train");
    const NoisePoolMap pools = load_noise_pools(cfg.noise_aware.specs);
    art.result = train(art.model, corpus, cfg.features, opts, cfg.noise_aware, cfg.loss_weights, pools);
    return art;
}

RobustnessReport run_eval(const ExperimentConfig& cfg, const Model& model) {
    const auto corpus = make_eval_corpus(cfg);
    std::vector<PerturbationSpec> suite_specs;
    for (const auto& ec : cfg.eval_suite) suite_specs.push_back(ec.spec);
    const NoisePoolMap pools = load_noise_pools(suite_specs);
    return eval_robustness(model, corpus, cfg.eval_suite, cfg.features,
                           derive_seed(cfg.seed, "eval"), pools, cfg.eval_workers);
}

double AblationSummary::mean_avg_ued(const std::string& variant) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& run : runs)
        if (run.variant == variant) {
            sum += run.avg_ued;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("AblationSummary: no runs for variant " + variant);
    return sum / n;
}

double AblationSummary::mean_clean_fer(const std::string& variant) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& run : runs)
        if (run.variant == variant) {
            sum += run.clean_fer;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("AblationSummary: no runs for variant " + variant);
    return sum / n;
}

AblationSummary run_ablation(const ExperimentConfig& base, const std::vector<int>& extra_voters,
                             int n_seeds, const std::string& out_dir,
                             const std::function<void(const std::string&)>& progress) {
    if (n_seeds < 1) throw std::invalid_argument("run_ablation: n_seeds must be >= 1");
    ExperimentConfig cfg = base;
    cfg.out_dir = out_dir;
    resolve_noise_pools(cfg);

    struct Variant {
        std::string name;
        int n_branches;
        bool consensus;
        bool noise_aware;
    };
    std::vector<Variant> variants = {
        {"full", cfg.model.quantizer.n_branches, true, true},
        {"no_consensus", cfg.model.quantizer.n_branches, false, true},
        {"no_noise_aware", cfg.model.quantizer.n_branches, false, false},
        {"single_branch", 1, false, false},
    };
    for (int v : extra_voters) {
        if (v == cfg.model.quantizer.n_branches) continue;
        variants.push_back({"voters_" + std::to_string(v), v, true, true});
    }

    const NoisePoolMap train_pools = load_noise_pools(cfg.noise_aware.specs);
    std::vector<PerturbationSpec> suite_specs;
    for (const auto& ec : cfg.eval_suite) suite_specs.push_back(ec.spec);
    const NoisePoolMap eval_pools = load_noise_pools(suite_specs);

    AblationSummary summary;
    for (int s = 0; s < n_seeds; ++s) {
        // Corpora and eval noise draws are shared across variants at the
        // same seed index, so comparisons are paired.
        CorpusSpec train_spec = cfg.corpus;
        train_spec.seed = derive_seed(cfg.seed, "ablate-corpus", static_cast<uint64_t>(s));
        const auto train_corpus = synth_corpus(train_spec, cfg.features);

        CorpusSpec eval_spec = cfg.corpus;
        eval_spec.n_utterances = cfg.n_eval_utterances;
        eval_spec.seed = derive_seed(cfg.seed, "ablate-eval-corpus", static_cast<uint64_t>(s));
        const auto eval_corpus = synth_corpus(eval_spec, cfg.features);

        for (const auto& variant : variants) {
            if (progress) progress(variant.name + " seed " + std::to_string(s));

            ModelConfig mc = cfg.model;
            mc.quantizer.n_branches = variant.n_branches;
            Model model = Model::init(mc, derive_seed(cfg.seed, "ablate-init", static_cast<uint64_t>(s)));

            LossWeights weights = cfg.loss_weights;
            if (!variant.consensus) weights.consensus = 0.0;
            NoiseAwareConfig noise = cfg.noise_aware;
            noise.enabled = noise.enabled && variant.noise_aware;

            TrainOptions opts = cfg.train_options;
            opts.seed = derive_seed(cfg.seed, "ablate-train/" + variant.name, static_cast<uint64_t>(s));
            const TrainResult result =
                train(model, train_corpus, cfg.features, opts, noise, weights, train_pools);

            const RobustnessReport report =
                eval_robustness(model, eval_corpus, cfg.eval_suite, cfg.features,
                                derive_seed(cfg.seed, "ablate-eval", static_cast<uint64_t>(s)),
                                eval_pools, cfg.eval_workers);

            const fs::path run_dir = fs::path(out_dir) / variant.name / ("seed" + std::to_string(s));
            fs::create_directories(run_dir);
            write_history_csv(result.history, (run_dir / "history.csv").string());
            write_report_json(report, (run_dir / "report.json").string());
            write_report_csv(report, (run_dir / "report.csv").string());

            AblationRun run;
            run.variant = variant.name;
            run.seed_index = s;
            run.avg_ued = report.average_ued;
            run.clean_fer = report.clean_frame_error_rate;
            run.final_val_accuracy =
                result.history.empty() ? 0.0 : result.history.back().val_frame_accuracy;
            for (const auto& row : report.rows) run.row_ued[row.name] = row.mean_ued;
            summary.runs.push_back(std::move(run));
        }
    }

    write_ablation_csv(summary, (fs::path(out_dir) / "ablation_summary.csv").string());
    return summary;
}

void write_ablation_csv(const AblationSummary& summary, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_ablation_csv: cannot write " + path);

    std::set<std::string> row_names;
    for (const auto& run : summary.runs)
        for (const auto& [name, ued] : run.row_ued) {
            (void)ued;
            row_names.insert(name);
        }

    out << "variant,seed_index,avg_ued,clean_fer,final_val_accuracy";
    for (const auto& name : row_names) out << ",ued_" << name;
    out << "\n";
    char buf[64];
    for (const auto& run : summary.runs) {
        out << run.variant << "," << run.seed_index;
        std::snprintf(buf, sizeof(buf), ",%.17g", run.avg_ued);
        out << buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", run.clean_fer);
        out << buf;
        std::snprintf(buf, sizeof(buf), ",%.17g", run.final_val_accuracy);
        out << buf;
        for (const auto& name : row_names) {
            const auto it = run.row_ued.find(name);
            std::snprintf(buf, sizeof(buf), ",%.17g", it == run.row_ued.end() ? -1.0 : it->second);
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace votetok
