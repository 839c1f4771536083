// Command-line front end: dataset generation, training, evaluation,
// benchmarking and checkpoint inspection.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcvae/data/slp_layout.hpp"
#include "mcvae/data/synth.hpp"
#include "mcvae/train/trainer.hpp"

using namespace mcvae;

namespace {

std::string one_line(std::string s)
{
    for (auto &c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

int fail(const std::string &kind, const std::string &message)
{
    std::cerr << "error: " << kind << ": " << one_line(message) << "\n";
    return 1;
}

void print_report(const train::EvalResult &r, const std::string &split, pose::CoverFilter filter)
{
    std::printf("split=%s cover=%s samples=%zu\n", split.c_str(), std::string(pose::to_string(filter)).c_str(),
                r.report.counts.samples);
    for (std::size_t j = 0; j < data::kJointCount; ++j)
        std::printf("%-11s %6.2f\n", std::string(data::kJointNames[j]).c_str(), 100.0 * r.report.per_joint[j]);
    std::printf("%-11s %6.2f\n", "Total", 100.0 * r.report.total);
    if (r.report.oui) std::printf("%-11s %6.2f\n", "OUI", 100.0 * *r.report.oui);
    if (r.report.oci) std::printf("%-11s %6.2f\n", "OCI", 100.0 * *r.report.oci);
    if (r.report.utilization) std::printf("%-11s %.4f\n", "utilization", *r.report.utilization);
    std::printf("%-11s %.6g\n", "pose_loss", r.pose_loss);
    if (r.recon) std::printf("%-11s %.6g\n", "recon_loss", *r.recon);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"MC-VAE missing-modality pose estimation toolkit"};
    app.require_subcommand(1);

    std::uint64_t gen_seed = 1;
    int gen_subjects = 20, gen_poses = 45;
    std::string gen_out;
    auto *gen = app.add_subcommand("gen-data", "Generate the synthetic dataset in the on-disk layout");
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_option("--subjects", gen_subjects, "Number of subjects")->check(CLI::PositiveNumber);
    gen->add_option("--poses", gen_poses, "Poses per subject")->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "Output root directory")->required();

    std::string train_config, train_out, train_resume;
    auto *tr = app.add_subcommand("train", "Train one strategy from a config file");
    tr->add_option("--config", train_config, "INI config")->check(CLI::ExistingFile);
    tr->add_option("--out", train_out, "Output directory (overrides experiment.out_dir)");
    tr->add_option("--resume", train_resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

    std::string eval_ckpt, eval_split = "test", eval_cover = "acc";
    bool eval_dual = false;
    auto *ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    ev->add_option("--split", eval_split, "train, val or test");
    ev->add_option("--cover", eval_cover, "acc, oui or oci");
    ev->add_flag("--dual", eval_dual, "Feed both modalities (required for feature fusion)");

    std::vector<std::string> bench_configs;
    std::vector<std::uint64_t> bench_seeds;
    std::string bench_out;
    auto *bench = app.add_subcommand("bench", "Train and compare several strategies");
    bench->add_option("--configs", bench_configs, "INI configs, one per strategy")->required()->check(
        CLI::ExistingFile);
    bench->add_option("--seeds", bench_seeds, "Replicate every config with these experiment seeds")->delimiter(',');
    bench->add_option("--out", bench_out, "Output directory")->required();

    std::string inspect_path;
    auto *inspect = app.add_subcommand("inspect-ckpt", "Summarise a checkpoint");
    inspect->add_option("--ckpt", inspect_path, "Checkpoint file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        return fail("usage", e.what()) + 1;
    }

    try {
        if (*gen) {
            const auto samples = data::generate_dataset(gen_seed, gen_subjects, gen_poses);
            data::export_slp_layout(gen_out, samples);
            std::printf("wrote %zu samples from %d subjects to %s\n", samples.size(), gen_subjects, gen_out.c_str());
        } else if (*tr) {
            train::RunState state = [&] {
                if (!train_resume.empty()) return train::restore(train::load_checkpoint(train_resume));
                return train::fresh_state(train_config.empty() ? train::ExperimentConfig{}
                                                               : train::load_config(train_config));
            }();
            if (!train_resume.empty() && !train_config.empty()) {
                // Only the schedule length may change on resume.
                const auto cfg = train::load_config(train_config);
                auto same = cfg;
                same.epochs = state.config.epochs;
                same.stop_after = state.config.stop_after;
                same.out_dir = state.config.out_dir;
                if (!(same == state.config))
                    return fail("config", "--config differs from the checkpoint beyond epochs/stop_after/out_dir");
                state.config.epochs = cfg.epochs;
                state.config.stop_after = cfg.stop_after;
                state.config.validate();
            } else if (!train_resume.empty()) {
                state.config.stop_after = 0;
            }
            if (!train_out.empty()) state.config.out_dir = train_out;
            const auto data = train::load_dataset(state.config);
            train::TrainOptions opt;
            opt.out_dir = state.config.out_dir;
            opt.on_row = [](const train::LogRow &row) { std::printf("%s\n", train::to_csv(row).c_str()); };
            std::printf("%s\n", train::log_header().c_str());
            const auto res = train::run_training(std::move(state), *data, opt);
            std::printf("%s after epoch %d; checkpoints in %s\n", res.finished ? "finished" : "stopped",
                        res.state.epoch, opt.out_dir.string().c_str());
        } else if (*ev) {
            const auto ckpt = train::load_checkpoint(eval_ckpt);
            const auto filter = pose::parse_cover_filter(eval_cover);
            const auto data = train::load_dataset(ckpt.config());
            const auto r = train::run_eval(ckpt, *data, eval_split, filter, !eval_dual);
            print_report(r, eval_split, filter);
        } else if (*bench) {
            std::vector<train::ExperimentConfig> configs;
            for (const auto &path : bench_configs) {
                const auto cfg = train::load_config(path);
                if (bench_seeds.empty()) configs.push_back(cfg);
                for (auto seed : bench_seeds) {
                    auto c = cfg;
                    c.seed = seed;
                    configs.push_back(c);
                }
            }
            const auto res = train::run_benchmark(configs, bench_out);
            const auto header = train::table_header();
            for (std::size_t i = 0; i < header.size(); ++i) std::printf("%s%s", i ? "," : "", header[i].c_str());
            std::printf("\n");
            for (const auto &row : res.table) {
                for (std::size_t i = 0; i < row.size(); ++i) std::printf("%s%s", i ? "," : "", row[i].c_str());
                std::printf("\n");
            }
        } else if (*inspect) {
            const auto ckpt = train::load_checkpoint(inspect_path);
            const auto cfg = ckpt.config();
            std::size_t scalars = 0;
            for (const auto &[name, t] : ckpt.tensors) scalars += t.values.size();
            std::printf("format_version %u\nstrategy %s\nepoch %llu\nbest_epoch %lld\nbest_val_pckh %.6f\n"
                        "tensors %zu\nscalars %zu\n",
                        train::Checkpoint::kFormatVersion, std::string(strategy::to_string(cfg.strategy)).c_str(),
                        static_cast<unsigned long long>(ckpt.epoch), static_cast<long long>(ckpt.best_epoch),
                        ckpt.best_metric, ckpt.tensors.size(), scalars);
            for (const auto &f : ckpt.frozen) std::printf("frozen %s\n", f.c_str());
            for (const auto &[name, t] : ckpt.tensors)
                std::printf("tensor %s %s\n", name.c_str(), ad::to_string(t.shape).c_str());
            std::printf("--- config\n%s", ckpt.config_text.c_str());
        }
    } catch (const train::ConfigError &e) {
        return fail("config", e.what());
    } catch (const train::CheckpointError &e) {
        return fail("checkpoint", e.what());
    } catch (const data::DatasetError &e) {
        return fail("dataset", e.what());
    } catch (const strategy::ModalityError &e) {
        return fail("modality", e.what());
    } catch (const std::exception &e) {
        return fail("runtime", e.what());
    }
    return 0;
}
