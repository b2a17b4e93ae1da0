#include "votetok/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "votetok/rng.hpp"

using nlohmann::json;

namespace votetok {

namespace {

constexpr int kCheckpointVersion = 1;

nn::Array uniform_init(std::vector<int> shape, int fan_in, uint64_t seed) {
    nn::Array a = nn::Array::zeros(std::move(shape));
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& e : a.v) e = rng.uniform(-bound, bound);
    return a;
}

// One encoder layer applied in place on row-major frames.
void affine_relu_rows(std::vector<double>& rows, int t, int in, const nn::Array& w,
                      const nn::Array& b, std::vector<double>& out) {
    const int o_dim = w.rows();
    out.assign(static_cast<size_t>(t) * o_dim, 0.0);
    for (int r = 0; r < t; ++r) {
        const double* xr = rows.data() + static_cast<size_t>(r) * in;
        double* yr = out.data() + static_cast<size_t>(r) * o_dim;
        for (int o = 0; o < o_dim; ++o) {
            const double* wo = w.v.data() + static_cast<size_t>(o) * in;
            double acc = b.v[o];
            for (int i = 0; i < in; ++i) acc += xr[i] * wo[i];
            yr[o] = acc > 0.0 ? acc : 0.0;
        }
    }
}

}  // namespace

nn::Array model_input(const FeatureMatrix& feats) {
    nn::Array x({feats.frames, feats.bands}, feats.v);
    for (auto& e : x.v) e = (e + 8.0) * 0.2;
    return x;
}

void ModelConfig::validate() const {
    if (feature_dim <= 0) throw std::invalid_argument("ModelConfig: feature_dim must be positive");
    if (encoder_hidden <= 0) throw std::invalid_argument("ModelConfig: encoder_hidden must be positive");
    if (hidden_dim <= 0) throw std::invalid_argument("ModelConfig: hidden_dim must be positive");
    if (pool_factor < 1) throw std::invalid_argument("ModelConfig: pool_factor must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("ModelConfig: n_classes must be >= 2");
    quantizer.validate();
    if (quantizer.hidden_dim != hidden_dim)
        throw std::invalid_argument("ModelConfig: quantizer.hidden_dim must equal hidden_dim");
}

Model Model::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.enc_w1 = uniform_init({cfg.encoder_hidden, cfg.feature_dim}, cfg.feature_dim,
                            derive_seed(seed, "init-enc1"));
    m.enc_b1 = nn::Array::zeros({cfg.encoder_hidden});
    m.enc_w2 = uniform_init({cfg.hidden_dim, cfg.encoder_hidden}, cfg.encoder_hidden,
                            derive_seed(seed, "init-enc2"));
    m.enc_b2 = nn::Array::zeros({cfg.hidden_dim});
    m.bank = init_branch_bank(cfg.quantizer, derive_seed(seed, "init-bank"));
    m.head_w = uniform_init({cfg.n_classes, cfg.quantizer.code_dim}, cfg.quantizer.code_dim,
                            derive_seed(seed, "init-head"));
    m.head_b = nn::Array::zeros({cfg.n_classes});
    return m;
}

void Model::for_each_param(const std::function<void(const std::string&, nn::Array&)>& fn) {
    fn("enc_w1", enc_w1);
    fn("enc_b1", enc_b1);
    fn("enc_w2", enc_w2);
    fn("enc_b2", enc_b2);
    for (int i = 0; i < bank.n_branches(); ++i) {
        fn("branch_w" + std::to_string(i), bank.w[i]);
        fn("branch_b" + std::to_string(i), bank.b[i]);
    }
    fn("head_w", head_w);
    fn("head_b", head_b);
}

void Model::for_each_param(const std::function<void(const std::string&, const nn::Array&)>& fn) const {
    const_cast<Model*>(this)->for_each_param(
        [&fn](const std::string& name, nn::Array& a) { fn(name, a); });
}

int64_t Model::param_count() const {
    int64_t n = 0;
    for_each_param([&n](const std::string&, const nn::Array& a) { n += a.size(); });
    return n;
}

std::vector<std::vector<double>> Model::encode_pooled(const FeatureMatrix& feats) const {
    if (feats.bands != cfg.feature_dim)
        throw std::invalid_argument("encode_pooled: feature dim mismatch");
    std::vector<double> x = model_input(feats).v;
    std::vector<double> h1, h2;
    affine_relu_rows(x, feats.frames, cfg.feature_dim, enc_w1, enc_b1, h1);
    affine_relu_rows(h1, feats.frames, cfg.encoder_hidden, enc_w2, enc_b2, h2);

    const int t = feats.frames, d = cfg.hidden_dim, f = cfg.pool_factor;
    const int tp = (t + f - 1) / f;
    std::vector<std::vector<double>> pooled(tp, std::vector<double>(d, 0.0));
    for (int r = 0; r < tp; ++r)
        for (int j = 0; j < f; ++j) {
            const int src = std::min(r * f + j, t - 1);
            for (int k = 0; k < d; ++k) pooled[r][k] += h2[static_cast<size_t>(src) * d + k] / f;
        }
    return pooled;
}

std::vector<TokenId> Model::tokenize_features(const FeatureMatrix& feats) const {
    const auto pooled = encode_pooled(feats);
    std::vector<TokenId> tokens;
    tokens.reserve(pooled.size());
    for (const auto& h : pooled) tokens.push_back(quantize_frame_infer(bank, h));
    return tokens;
}

std::vector<TokenId> Model::tokenize(const Waveform& w, const FeatureConfig& fcfg) const {
    return tokenize_features(extract_features(w, fcfg));
}

std::vector<int> Model::predict_labels(const FeatureMatrix& feats) const {
    const auto pooled = encode_pooled(feats);
    const int d = cfg.quantizer.code_dim, v = cfg.n_classes;
    std::vector<int> labels;
    labels.reserve(pooled.size());
    for (const auto& h : pooled) {
        // Head input is the consensus score (mean of branch codes).
        std::vector<BinaryCode> codes;
        codes.reserve(bank.n_branches());
        for (int i = 0; i < bank.n_branches(); ++i)
            codes.push_back(binarize_plain(project_one(bank, i, h)));
        const auto s = aggregate_train_plain(codes);

        int best = 0;
        double best_logit = -1e300;
        for (int c = 0; c < v; ++c) {
            double acc = head_b.v[c];
            const double* wc = head_w.v.data() + static_cast<size_t>(c) * d;
            for (int j = 0; j < d; ++j) acc += wc[j] * s[j];
            if (acc > best_logit) {
                best_logit = acc;
                best = c;
            }
        }
        labels.push_back(best);
    }
    return labels;
}

std::vector<int> pool_labels(const std::vector<int>& labels, int factor) {
    if (factor < 1) throw std::invalid_argument("pool_labels: factor must be >= 1");
    const int t = static_cast<int>(labels.size());
    const int tp = (t + factor - 1) / factor;
    std::vector<int> out(tp);
    for (int r = 0; r < tp; ++r) out[r] = labels[r * factor];
    return out;
}

void save_checkpoint(const Model& model, const std::string& path) {
    json params = json::object();
    model.for_each_param([&params](const std::string& name, const nn::Array& a) {
        params[name] = {{"shape", a.shape}, {"values", a.v}};
    });
    json j = {
        {"format_version", kCheckpointVersion},
        {"config",
         {{"feature_dim", model.cfg.feature_dim},
          {"encoder_hidden", model.cfg.encoder_hidden},
          {"hidden_dim", model.cfg.hidden_dim},
          {"pool_factor", model.cfg.pool_factor},
          {"n_branches", model.cfg.quantizer.n_branches},
          {"code_dim", model.cfg.quantizer.code_dim},
          {"ste_clip", model.cfg.quantizer.ste_clip},
          {"n_classes", model.cfg.n_classes}}},
        {"params", std::move(params)},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    out << j.dump();
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    json j;
    in >> j;
    if (j.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version");

    const json& c = j.at("config");
    ModelConfig cfg;
    cfg.feature_dim = c.at("feature_dim").get<int>();
    cfg.encoder_hidden = c.at("encoder_hidden").get<int>();
    cfg.hidden_dim = c.at("hidden_dim").get<int>();
    cfg.pool_factor = c.at("pool_factor").get<int>();
    cfg.quantizer.n_branches = c.at("n_branches").get<int>();
    cfg.quantizer.code_dim = c.at("code_dim").get<int>();
    cfg.quantizer.hidden_dim = cfg.hidden_dim;
    cfg.quantizer.ste_clip = c.at("ste_clip").get<bool>();
    cfg.n_classes = c.at("n_classes").get<int>();

    Model m = Model::init(cfg, 0);
    const json& params = j.at("params");
    m.for_each_param([&params, &path](const std::string& name, nn::Array& a) {
        const json& p = params.at(name);
        const auto shape = p.at("shape").get<std::vector<int>>();
        if (shape != a.shape) throw std::runtime_error("load_checkpoint: shape mismatch for " + name + " in " + path);
        a.v = p.at("values").get<std::vector<double>>();
    });
    return m;
}

void write_tokens_jsonl(const std::vector<std::pair<std::string, std::vector<TokenId>>>& seqs,
                        int code_dim, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_tokens_jsonl: cannot write " + path);
    out << json{{"header", {{"code_dim", code_dim}}}}.dump() << "\n";
    for (const auto& [id, tokens] : seqs)
        out << json{{"id", id}, {"tokens", tokens}}.dump() << "\n";
}

std::vector<std::pair<std::string, std::vector<TokenId>>> read_tokens_jsonl(const std::string& path,
                                                                            int* code_dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_tokens_jsonl: cannot open " + path);
    std::vector<std::pair<std::string, std::vector<TokenId>>> seqs;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (first) {
            first = false;
            if (j.contains("header")) {
                if (code_dim) *code_dim = j.at("header").at("code_dim").get<int>();
                continue;
            }
        }
        seqs.emplace_back(j.at("id").get<std::string>(), j.at("tokens").get<std::vector<TokenId>>());
    }
    return seqs;
}

}  // namespace votetok
