#include "mcvae/train/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "mcvae/data/augment.hpp"
#include "mcvae/data/slp_layout.hpp"

namespace mcvae::train {

using ad::Tensor;
using data::kJointCount;
using data::Sample;
using strategy::Kind;

namespace {

constexpr std::uint64_t kEpochStream = 0xE90C;
constexpr std::uint64_t kEvalStream = 0xE7A10000;

std::string num(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string opt_num(const std::optional<double> &v) { return v ? num(*v) : std::string(); }

void write_text(const std::filesystem::path &path, const std::string &text)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Training samples grouped by pose, in order of first appearance.
std::vector<std::vector<std::size_t>> pose_groups(const std::vector<const Sample *> &samples)
{
    std::map<std::pair<int, int>, std::size_t> slot;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto [it, fresh] = slot.emplace(std::pair{samples[i]->subject, samples[i]->pose}, groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

std::vector<std::size_t> epoch_order(const std::vector<std::vector<std::size_t>> &groups, CoverSampling mode,
                                     CounterRng &rng)
{
    std::vector<std::size_t> order;
    for (const auto &g : groups) {
        if (mode == CoverSampling::all) order.insert(order.end(), g.begin(), g.end());
        else order.push_back(g[rng.below(g.size())]);
    }
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

// Identifies a sample independently of how it is batched.
std::uint64_t sample_key(std::uint64_t seed, const Sample &s)
{
    std::uint64_t h = CounterRng::mix(seed ^ kEvalStream);
    for (std::uint64_t v : {std::uint64_t(s.subject), std::uint64_t(s.pose), std::uint64_t(s.cover)})
        h = CounterRng::mix(h ^ v);
    return h;
}

std::vector<std::size_t> sibling_index(const std::vector<const Sample *> &samples)
{
    std::vector<std::size_t> out(samples.size());
    for (auto [i, j] : data::pair_for_vae(samples)) out[i] = j;
    return out;
}

} // namespace

const std::vector<const Sample *> &Dataset::subset(const std::string &name) const
{
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

std::shared_ptr<const Dataset> load_dataset(const ExperimentConfig &cfg)
{
    auto ds = std::make_shared<Dataset>();
    ds->samples = cfg.data_root.empty() ? data::generate_dataset(cfg.data_seed, cfg.subjects, cfg.poses_per_subject)
                                        : data::load_slp_layout(cfg.data_root);
    std::vector<int> subjects;
    for (const auto &s : ds->samples) subjects.push_back(s.subject);
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    const auto split = data::make_split(int(subjects.size()), cfg.data_seed);
    ds->split.seed = split.seed;
    for (auto [from, to] : {std::pair{&split.train, &ds->split.train}, std::pair{&split.val, &ds->split.val},
                            std::pair{&split.test, &ds->split.test}})
        for (int k : *from) to->push_back(subjects[std::size_t(k)]);
    ds->train = data::select_subjects(ds->samples, ds->split.train);
    ds->val = data::select_subjects(ds->samples, ds->split.val);
    ds->test = data::select_subjects(ds->samples, ds->split.test);
    return ds;
}

RunState fresh_state(const ExperimentConfig &cfg)
{
    cfg.validate();
    RunState s{cfg, strategy::Assembly(cfg.strategy, cfg.model, cfg.seed), nn::Optimizer{}, 0,
               CounterRng(cfg.seed, kEpochStream).state(), -1.0, -1};
    return s;
}

Checkpoint snapshot(const RunState &state)
{
    Checkpoint c;
    c.config_text = serialize(state.config);
    c.epoch = std::uint64_t(state.epoch);
    c.rng = state.rng;
    c.best_metric = state.best_metric;
    c.best_epoch = state.best_epoch;
    c.frozen = state.model.params().frozen_prefixes();
    for (const auto &[name, t] : state.model.params().all()) {
        TensorRecord r;
        r.shape = t.shape();
        r.values.assign(t.data().begin(), t.data().end());
        if (auto it = state.optimizer.slots().find(name); it != state.optimizer.slots().end()) r.slot = it->second;
        c.tensors.emplace(name, std::move(r));
    }
    return c;
}

RunState restore(const Checkpoint &ckpt)
{
    RunState s = fresh_state(ckpt.config());
    auto &params = s.model.params();
    if (params.all().size() != ckpt.tensors.size())
        throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                              std::to_string(params.all().size()));
    for (const auto &[name, rec] : ckpt.tensors) {
        if (!params.contains(name)) throw CheckpointError("checkpoint tensor '" + name + "' is not a model parameter");
        Tensor &t = params.at(name);
        if (t.shape() != rec.shape)
            throw CheckpointError("checkpoint tensor '" + name + "' has shape " + ad::to_string(rec.shape) +
                                  ", model expects " + ad::to_string(t.shape()));
        std::copy(rec.values.begin(), rec.values.end(), t.mutable_data().begin());
        if (rec.slot.steps != 0 || !rec.slot.m.empty()) s.optimizer.slots()[name] = rec.slot;
    }
    for (const auto &f : std::set<std::string>(params.frozen_prefixes())) params.unfreeze(f);
    for (const auto &f : ckpt.frozen) params.freeze(f);
    s.epoch = int(ckpt.epoch);
    s.rng = ckpt.rng;
    s.best_metric = ckpt.best_metric;
    s.best_epoch = ckpt.best_epoch;
    if (s.config.strategy == Kind::fine_tune) s.model.finetune_phase = s.epoch < s.config.phase_one_epochs() ? 1 : 2;
    return s;
}

std::string log_header() { return "epoch,split,lr,pose,reg,recon,total,pckh,utilization"; }

std::string to_csv(const LogRow &r)
{
    return std::to_string(r.epoch) + "," + r.split + "," + num(r.lr) + "," + num(r.pose) + "," + opt_num(r.reg) +
           "," + opt_num(r.recon) + "," + num(r.total) + "," + opt_num(r.pckh) + "," + opt_num(r.utilization);
}

EvalResult evaluate(const strategy::Assembly &model, const std::vector<const Sample *> &samples,
                    const EvalOptions &opt)
{
    const Kind kind = model.kind();
    if (kind == Kind::feature_fusion && opt.single_modality)
        throw strategy::ModalityError("feature fusion requires both modalities");
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (pose::matches(opt.filter, samples[i]->cover)) chosen.push_back(i);
    if (chosen.empty())
        throw std::invalid_argument("evaluation set is empty after the " + std::string(pose::to_string(opt.filter)) +
                                    " cover filter");

    std::optional<std::vector<std::size_t>> sibling;
    if (kind == Kind::mcvae) {
        try {
            sibling = sibling_index(samples);
        } catch (const std::invalid_argument &) {
            // No uncovered references: report pose metrics only.
        }
    }
    const bool with_m2 = kind == Kind::feature_fusion || (kind == Kind::mcvae && sibling) ||
                         (kind == Kind::rdf && !opt.single_modality);

    EvalResult res;
    res.samples.reserve(chosen.size());
    model::UtilizationMeter meter;
    double pose_sum = 0.0, reg_sum = 0.0, recon_sum = 0.0;
    const std::size_t bs = std::max<std::size_t>(1, opt.batch_size);
    for (std::size_t b = 0, start = 0; start < chosen.size(); ++b, start += bs) {
        const std::size_t end = std::min(chosen.size(), start + bs);
        std::vector<Sample> items;
        items.reserve(end - start);
        for (std::size_t k = start; k < end; ++k) {
            const Sample &s = *samples[chosen[k]];
            items.push_back(sibling ? data::with_uncovered_m2(s, *samples[(*sibling)[chosen[k]]]) : s);
        }
        auto batch = strategy::make_batch(items, with_m2, model.config().heatmap_sigma);
        for (const auto &s : items) batch.row_keys.push_back(sample_key(opt.seed, s));
        CounterRng rng(opt.seed, kEvalStream + b);
        const auto out = model.infer(batch, rng, opt.single_modality);
        const double n = double(items.size());
        pose_sum += out.losses.pose.item() * n;
        if (out.losses.reg.defined()) reg_sum += out.losses.reg.item() * n;
        if (out.losses.recon.defined()) recon_sum += out.losses.recon.item() * n;
        if (out.weights) meter.add(*out.weights);

        const std::size_t per = kJointCount * pose::kGrid * pose::kGrid;
        for (std::size_t k = 0; k < items.size(); ++k) {
            const auto kp = pose::decode_keypoints(out.heatmaps.data().subspan(k * per, per));
            pose::SampleResult r;
            r.correct = pose::pckh(kp, items[k].joints, items[k].visible, items[k].head_size);
            r.visible = items[k].visible;
            r.cover = items[k].cover;
            res.samples.push_back(r);
        }
    }
    const double total = double(chosen.size());
    res.pose_loss = pose_sum / total;
    if (kind == Kind::mcvae && sibling) {
        res.reg = reg_sum / total;
        res.recon = recon_sum / total;
    }
    std::optional<double> util;
    if (kind == Kind::rdf) util = meter.empty() ? 0.0 : meter.value();
    else if (kind != Kind::fine_tune) util = meter.value();
    res.report = pose::aggregate_report(res.samples, util);
    return res;
}

TrainResult run_training(RunState start, const Dataset &data, const TrainOptions &opt)
{
    TrainResult res{std::move(start), std::nullopt, {}, false};
    RunState &st = res.state;
    const ExperimentConfig &cfg = st.config;
    const Kind kind = cfg.strategy;
    if (data.train.empty() || data.val.empty()) throw std::invalid_argument("training needs non-empty train and val splits");

    const bool files = !opt.out_dir.empty();
    std::ofstream log;
    if (files) {
        std::filesystem::create_directories(opt.out_dir);
        const auto path = opt.out_dir / "log.csv";
        const bool fresh = st.epoch == 0 || !std::filesystem::exists(path);
        log.open(path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw std::runtime_error("cannot write " + path.string());
        if (fresh) log << log_header() << "\n";
        write_text(opt.out_dir / "config.ini", serialize(cfg));
    }
    auto emit = [&](const LogRow &row) {
        res.log.push_back(row);
        if (files) log << to_csv(row) << std::endl;
        if (opt.on_row) opt.on_row(row);
    };

    const auto groups = pose_groups(data.train);
    std::vector<std::size_t> sibling;
    if (kind == Kind::mcvae) sibling = sibling_index(data.train);
    const EvalOptions val_opt{pose::CoverFilter::acc, kind != Kind::feature_fusion, 32, cfg.seed};

    auto validate = [&](int epoch) {
        const auto ev = evaluate(st.model, data.val, val_opt);
        LogRow row{epoch, "val", lr_at(cfg, std::max(0, epoch - 1)), ev.pose_loss, ev.reg, ev.recon, ev.pose_loss,
                   ev.report.total, ev.report.utilization};
        if (ev.reg && ev.recon)
            row.total = ev.pose_loss + cfg.model.lambda_reg * *ev.reg + cfg.model.lambda_recon * *ev.recon;
        emit(row);
        if (ev.report.total > st.best_metric) {
            st.best_metric = ev.report.total;
            st.best_epoch = epoch;
            res.best = snapshot(st);
            if (files) save_checkpoint(*res.best, opt.out_dir / "best.ckpt");
        }
    };

    if (st.epoch == 0) {
        if (kind == Kind::fine_tune) st.model.finetune_phase = cfg.phase_one_epochs() > 0 ? 1 : 2;
        validate(0);
    }

    for (int e = st.epoch; e < cfg.epochs; ++e) {
        CounterRng erng(st.rng);
        CounterRng order_rng = erng.derive(1), aug_rng = erng.derive(2), model_rng = erng.derive(3);
        if (kind == Kind::fine_tune) {
            st.model.finetune_phase = e < cfg.phase_one_epochs() ? 1 : 2;
            if (st.model.finetune_phase == 2) st.model.freeze_stem();
        }
        const double lr = lr_at(cfg, e), beta = beta_at(cfg, e);
        const auto order = epoch_order(groups, cfg.cover_sampling, order_rng);

        double pose_sum = 0.0, reg_sum = 0.0, recon_sum = 0.0, total_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Sample> items;
            items.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                Sample s = kind == Kind::mcvae ? data::with_uncovered_m2(*data.train[i], *data.train[sibling[i]])
                                               : *data.train[i];
                const std::uint64_t aug_seed = aug_rng.next_u64();
                if (cfg.augment) s = data::augment(s, aug_seed, cfg.augmentation);
                items.push_back(std::move(s));
            }
            const auto batch = strategy::make_batch(items, true, cfg.model.heatmap_sigma);
            st.model.params().zero_grad();
            const auto out = st.model.train_forward(batch, model_rng, beta);
            ad::check_finite(out.losses.total, "training loss");
            ad::backward(out.losses.total);
            st.optimizer.step(st.model.params(), lr);

            const double n = double(items.size());
            pose_sum += out.losses.pose.item() * n;
            total_sum += out.losses.total.item() * n;
            if (out.losses.reg.defined()) reg_sum += out.losses.reg.item() * n;
            if (out.losses.recon.defined()) recon_sum += out.losses.recon.item() * n;
        }
        st.rng = erng.derive(4).state();
        st.epoch = e + 1;

        const double n = double(order.size());
        LogRow row{st.epoch, "train", lr, pose_sum / n, std::nullopt, std::nullopt, total_sum / n, std::nullopt,
                   std::nullopt};
        if (kind == Kind::mcvae) {
            row.reg = reg_sum / n;
            row.recon = recon_sum / n;
        }
        emit(row);
        if (st.epoch % cfg.val_every == 0 || st.epoch == cfg.epochs) validate(st.epoch);
        if (files) save_checkpoint(snapshot(st), opt.out_dir / "last.ckpt");
        if (cfg.stop_after > 0 && st.epoch == cfg.stop_after && st.epoch < cfg.epochs) return res;
    }
    res.finished = true;
    return res;
}

EvalResult run_eval(const Checkpoint &ckpt, const Dataset &data, const std::string &split, pose::CoverFilter filter,
                    bool single_modality)
{
    const RunState st = restore(ckpt);
    return evaluate(st.model, data.subset(split), {filter, single_modality, 32, st.config.seed});
}

std::size_t thread_cap()
{
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("MCVAE_THREADS")) {
        std::size_t v = 0;
        const std::string s(env);
        auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v == 0)
            throw std::invalid_argument("MCVAE_THREADS must be a positive integer, got '" + s + "'");
        n = v;
    }
    return n;
}

std::vector<std::string> table_header()
{
    std::vector<std::string> h{"method"};
    for (auto name : data::kJointNames) h.emplace_back(name);
    h.emplace_back("Total");
    h.emplace_back("utilization");
    return h;
}

namespace {

std::string run_name(const ExperimentConfig &c)
{
    return std::string(strategy::to_string(c.strategy)) + "_seed" + std::to_string(c.seed);
}

std::string csv_line(const std::vector<std::string> &cells)
{
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    return s + "\n";
}

void write_reports(const BenchResult &res, const std::filesystem::path &dir)
{
    std::string table = csv_line(table_header());
    for (const auto &row : res.table) table += csv_line(row);
    write_text(dir / "table2.csv", table);

    std::string runs = "method,seed,ACC,OUI,OCI,utilization,best_epoch\n";
    std::string curves = "method,seed," + log_header() + "\n";
    std::map<Kind, std::vector<const BenchRun *>> by_kind;
    for (const auto &r : res.runs) {
        const auto &c = r.config;
        runs += csv_line({std::string(strategy::display_name(c.strategy)), std::to_string(c.seed),
                          num(r.all.report.total), num(r.uncovered.report.total), num(r.covered.report.total),
                          opt_num(r.covered.report.utilization), std::to_string(r.best_epoch)});
        for (const auto &row : r.log)
            curves += std::string(strategy::display_name(c.strategy)) + "," + std::to_string(c.seed) + "," +
                      to_csv(row) + "\n";
    }
    write_text(dir / "runs.csv", runs);

    std::string covers = "method,ACC,OUI,OCI,utilization\n";
    std::vector<Kind> order;
    for (const auto &r : res.runs) {
        if (!by_kind.count(r.config.strategy)) order.push_back(r.config.strategy);
        by_kind[r.config.strategy].push_back(&r);
    }
    for (Kind k : order) {
        double acc = 0.0, oui = 0.0, oci = 0.0, util = 0.0;
        bool has_util = true;
        for (const auto *r : by_kind[k]) {
            acc += r->all.report.total;
            oui += r->uncovered.report.total;
            oci += r->covered.report.total;
            if (r->covered.report.utilization) util += *r->covered.report.utilization;
            else has_util = false;
        }
        const double n = double(by_kind[k].size());
        covers += csv_line({std::string(strategy::display_name(k)), num(100.0 * acc / n), num(100.0 * oui / n),
                            num(100.0 * oci / n), has_util ? num(util / n) : std::string()});
    }
    write_text(dir / "covers.csv", covers);
    write_text(dir / "loss_curves.csv", curves);
}

std::vector<std::vector<std::string>> build_table(const std::vector<BenchRun> &runs)
{
    std::vector<Kind> kinds;
    for (const auto &r : runs)
        if (std::find(kinds.begin(), kinds.end(), r.config.strategy) == kinds.end()) kinds.push_back(r.config.strategy);
    std::vector<std::vector<std::string>> rows;
    for (Kind k : kinds) {
        std::array<double, kJointCount> joints{};
        double total = 0.0, util = 0.0, count = 0.0;
        bool has_util = true;
        for (const auto &r : runs) {
            if (r.config.strategy != k) continue;
            const auto &rep = r.covered.report;
            for (std::size_t j = 0; j < kJointCount; ++j) joints[j] += rep.per_joint[j];
            total += rep.total;
            if (rep.utilization) util += *rep.utilization;
            else has_util = false;
            count += 1.0;
        }
        std::vector<std::string> row{std::string(strategy::display_name(k))};
        for (double v : joints) row.push_back(num(100.0 * v / count));
        row.push_back(num(100.0 * total / count));
        row.push_back(has_util ? num(util / count) : std::string());
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

BenchResult run_benchmark(const std::vector<ExperimentConfig> &configs, const std::filesystem::path &out_dir,
                          std::size_t threads)
{
    if (configs.size() < 2) throw std::invalid_argument("benchmark needs at least two configs");
    std::vector<Kind> kinds;
    for (const auto &c : configs) {
        c.validate();
        if (c.data_seed != configs[0].data_seed || c.subjects != configs[0].subjects ||
            c.poses_per_subject != configs[0].poses_per_subject || c.data_root != configs[0].data_root)
            throw std::invalid_argument("benchmark configs must share one dataset (seed, sizes and root)");
        if (std::find(kinds.begin(), kinds.end(), c.strategy) == kinds.end()) kinds.push_back(c.strategy);
    }
    if (kinds.size() < 2) throw std::invalid_argument("benchmark needs at least two strategies");
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    const auto data = load_dataset(configs[0]);
    std::vector<std::optional<BenchRun>> done(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                ExperimentConfig cfg = configs[i];
                TrainOptions topt;
                if (!out_dir.empty()) topt.out_dir = out_dir / run_name(cfg);
                cfg.out_dir = topt.out_dir.string();
                auto tr = run_training(fresh_state(cfg), *data, topt);
                const RunState best = tr.best ? restore(*tr.best) : std::move(tr.state);
                const bool single = cfg.strategy != Kind::feature_fusion;
                EvalOptions eo{pose::CoverFilter::oci, single, 32, cfg.seed};
                BenchRun run{cfg, {}, {}, {}, std::move(tr.log), best.best_epoch};
                run.covered = evaluate(best.model, data->test, eo);
                eo.filter = pose::CoverFilter::oui;
                run.uncovered = evaluate(best.model, data->test, eo);
                eo.filter = pose::CoverFilter::acc;
                run.all = evaluate(best.model, data->test, eo);
                done[i] = std::move(run);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, configs.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto &t : pool) t.join();
    }

    BenchResult res;
    for (auto &d : done)
        if (d) res.runs.push_back(std::move(*d));
    res.table = build_table(res.runs);
    if (!out_dir.empty() && !res.runs.empty()) write_reports(res, out_dir);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception &e) {
            throw std::runtime_error("benchmark run " + run_name(configs[i]) + " failed: " + e.what());
        }
    }
    return res;
}

} // namespace mcvae::train
