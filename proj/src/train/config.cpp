#include "mcvae/train/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mcvae::train {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string &s, const std::string &where)
{
    T v{};
    const char *b = s.data(), *e = s.data() + s.size();
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw ConfigError("config: " + where + ": cannot parse '" + s + "'");
    return v;
}

bool parse_bool(const std::string &s, const std::string &where)
{
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config: " + where + ": expected true or false, got '" + s + "'");
}

std::vector<int> parse_int_list(const std::string &s, const std::string &where)
{
    std::vector<int> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        out.push_back(parse_number<int>(item, where));
    }
    return out;
}

struct Field {
    const char *section;
    const char *key;
    std::function<std::string(const ExperimentConfig &)> get;
    std::function<void(ExperimentConfig &, const std::string &, const std::string &)> set;
};

template <class T>
Field number(const char *section, const char *key, T ExperimentConfig::*member)
{
    return {section, key, [member](const ExperimentConfig &c) {
                if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
                else return std::to_string(c.*member);
            },
            [member](ExperimentConfig &c, const std::string &v, const std::string &w) {
                c.*member = parse_number<T>(v, w);
            }};
}

template <class T, class S>
Field nested(const char *section, const char *key, S ExperimentConfig::*outer, T S::*member)
{
    return {section, key, [outer, member](const ExperimentConfig &c) {
                if constexpr (std::is_floating_point_v<T>) return fmt(c.*outer.*member);
                else return std::to_string(c.*outer.*member);
            },
            [outer, member](ExperimentConfig &c, const std::string &v, const std::string &w) {
                c.*outer.*member = parse_number<T>(v, w);
            }};
}

const std::vector<Field> &fields()
{
    using C = ExperimentConfig;
    using M = strategy::ModelConfig;
    using A = data::AugmentConfig;
    static const std::vector<Field> table = {
        {"experiment", "strategy", [](const C &c) { return std::string(strategy::to_string(c.strategy)); },
         [](C &c, const std::string &v, const std::string &w) {
             try {
                 c.strategy = strategy::parse_kind(v);
             } catch (const std::invalid_argument &e) {
                 throw ConfigError("config: " + w + ": " + e.what());
             }
         }},
        number("experiment", "seed", &C::seed),
        {"experiment", "out_dir", [](const C &c) { return c.out_dir; },
         [](C &c, const std::string &v, const std::string &) { c.out_dir = v; }},

        number("data", "seed", &C::data_seed),
        number("data", "subjects", &C::subjects),
        number("data", "poses_per_subject", &C::poses_per_subject),
        {"data", "root", [](const C &c) { return c.data_root; },
         [](C &c, const std::string &v, const std::string &) { c.data_root = v; }},
        {"data", "cover_sampling", [](const C &c) { return std::string(to_string(c.cover_sampling)); },
         [](C &c, const std::string &v, const std::string &w) {
             if (v == "all") c.cover_sampling = CoverSampling::all;
             else if (v == "random") c.cover_sampling = CoverSampling::random;
             else throw ConfigError("config: " + w + ": expected all or random, got '" + v + "'");
         }},

        number("train", "epochs", &C::epochs),
        number("train", "lr", &C::lr),
        number("train", "lr_decay", &C::lr_decay),
        {"train", "milestones",
         [](const C &c) {
             std::string s;
             for (std::size_t i = 0; i < c.milestones.size(); ++i) s += (i ? "," : "") + std::to_string(c.milestones[i]);
             return s;
         },
         [](C &c, const std::string &v, const std::string &w) { c.milestones = parse_int_list(v, w); }},
        number("train", "batch_size", &C::batch_size),
        number("train", "beta", &C::beta),
        number("train", "beta_warmup", &C::beta_warmup),
        number("train", "finetune_phase_epochs", &C::finetune_phase_epochs),
        number("train", "val_every", &C::val_every),
        number("train", "stop_after", &C::stop_after),
        {"train", "augment", [](const C &c) { return std::string(c.augment ? "true" : "false"); },
         [](C &c, const std::string &v, const std::string &w) { c.augment = parse_bool(v, w); }},

        nested("model", "lambda_reg", &C::model, &M::lambda_reg),
        nested("model", "lambda_recon", &C::model, &M::lambda_recon),
        nested("model", "rdf_p", &C::model, &M::rdf_p),
        nested("model", "recon_draws", &C::model, &M::recon_draws),
        nested("model", "fusion_ratio", &C::model, &M::fusion_ratio),
        nested("model", "heatmap_sigma", &C::model, &M::heatmap_sigma),
        {"model", "latent_dim", [](const C &c) { return std::to_string(c.model.vae.latent_dim); },
         [](C &c, const std::string &v, const std::string &w) {
             c.model.vae.latent_dim = parse_number<std::size_t>(v, w);
         }},
        {"model", "vae_width", [](const C &c) { return std::to_string(c.model.vae.width); },
         [](C &c, const std::string &v, const std::string &w) { c.model.vae.width = parse_number<std::size_t>(v, w); }},
        {"model", "alpha_m1", [](const C &c) { return fmt(c.model.vae.alpha[0]); },
         [](C &c, const std::string &v, const std::string &w) {
             c.model.vae.alpha[0] = parse_number<double>(v, w);
             c.model.vae.alpha[1] = 1.0 - c.model.vae.alpha[0];
         }},

        nested("augment", "rotation_deg", &C::augmentation, &A::rotation_deg),
        nested("augment", "shift_frac", &C::augmentation, &A::shift_frac),
        nested("augment", "scale_delta", &C::augmentation, &A::scale_delta),
        nested("augment", "jitter", &C::augmentation, &A::jitter),
        nested("augment", "occlusion_area", &C::augmentation, &A::occlusion_area),
    };
    return table;
}

} // namespace

std::string_view to_string(CoverSampling s) { return s == CoverSampling::all ? "all" : "random"; }

bool ExperimentConfig::operator==(const ExperimentConfig &o) const { return serialize(*this) == serialize(o); }

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string &m) { throw ConfigError("config: " + m); };
    if (subjects < 3) fail("data.subjects must be at least 3");
    if (poses_per_subject < 1) fail("data.poses_per_subject must be at least 1");
    if (epochs < 1) fail("train.epochs must be positive");
    if (!(lr > 0.0)) fail("train.lr must be positive");
    if (!(lr_decay > 0.0)) fail("train.lr_decay must be positive");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        if (milestones[i] <= 0 || milestones[i] >= epochs)
            fail("train.milestones must lie strictly between 0 and epochs (" + std::to_string(epochs) + ")");
        if (i && milestones[i] <= milestones[i - 1]) fail("train.milestones must be increasing");
    }
    if (batch_size < 1) fail("train.batch_size must be positive");
    if (!(beta >= 0.0)) fail("train.beta must be non-negative");
    if (beta_warmup < 0) fail("train.beta_warmup must be non-negative");
    if (finetune_phase_epochs > epochs) fail("train.finetune_phase_epochs exceeds epochs");
    if (val_every < 1) fail("train.val_every must be positive");
    if (stop_after < 0) fail("train.stop_after must be non-negative");
    if (!(model.rdf_p >= 0.0 && model.rdf_p <= 1.0)) fail("model.rdf_p must lie in [0, 1]");
    if (!(model.lambda_reg > 0.0) || !(model.lambda_recon > 0.0)) fail("model loss weights must be positive");
    if (model.recon_draws < 1) fail("model.recon_draws must be positive");
    if (model.fusion_ratio < 1) fail("model.fusion_ratio must be positive");
    if (!(model.heatmap_sigma > 0.0)) fail("model.heatmap_sigma must be positive");
    if (model.vae.latent_dim < 1 || model.vae.width < 1) fail("model.latent_dim and model.vae_width must be positive");
    if (!(model.vae.alpha[0] > 0.0 && model.vae.alpha[0] < 1.0)) fail("model.alpha_m1 must lie in (0, 1)");
}

double lr_at(const ExperimentConfig &cfg, int epoch)
{
    double lr = cfg.lr;
    for (int m : cfg.milestones)
        if (epoch >= m) lr *= cfg.lr_decay;
    return lr;
}

double beta_at(const ExperimentConfig &cfg, int epoch)
{
    if (cfg.beta_warmup <= 0) return cfg.beta;
    return cfg.beta * std::min(1.0, double(epoch + 1) / double(cfg.beta_warmup));
}

ExperimentConfig parse_config(const std::string &text)
{
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error &e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig cfg;
    for (const auto &[section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config: key '" + section + "' outside of a section");
        for (const auto &[key, value] : body) {
            const std::string where = section + "." + key;
            const std::string v = value.data();
            if (section == "experiment" && key == "version") {
                if (parse_number<int>(v, where) != ExperimentConfig::kVersion)
                    throw ConfigError("config: version " + v + " does not match supported version " +
                                      std::to_string(ExperimentConfig::kVersion));
                continue;
            }
            const auto &table = fields();
            auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field &f) { return section == f.section && key == f.key; });
            if (it == table.end()) throw ConfigError("config: unknown key '" + where + "'");
            it->set(cfg, v, where);
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string serialize(const ExperimentConfig &cfg)
{
    std::string out = "[experiment]\nversion = " + std::to_string(ExperimentConfig::kVersion) + "\n";
    std::string current = "experiment";
    for (const auto &f : fields()) {
        if (current != f.section) {
            current = f.section;
            out += "\n[" + current + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

} // namespace mcvae::train
