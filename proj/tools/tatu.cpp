#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "tatu/config.hpp"
#include "tatu/io.hpp"
#include "tatu/pipeline.hpp"
#include "tatu/rng.hpp"

namespace {

// Exit codes: 0 ok, 2 config, 3 missing file, 4 schema/format, 5 numeric.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kFileError = 3;
constexpr int kSchemaError = 4;
constexpr int kNumericError = 5;

using namespace tatu;

RunConfig load_config(const std::string& path, std::uint64_t* seed_override,
                      const std::string& out_dir_override) {
    RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
    if (seed_override) cfg.seed = *seed_override;
    if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
    std::filesystem::create_directories(cfg.out_dir);
    cfg.save(cfg.out_dir + "/config_resolved.json");
    return cfg;
}

ActionSampler sampler_from(const RunConfig& cfg, const CvaeModel* cvae, const ActorCritic* actor) {
    if (cfg.augment.action_source == ActionSource::cvae) {
        if (!cvae) throw FileError("augment: CVAE checkpoint required for action_source=cvae");
        CvaeModel model = *cvae;
        return [model](const Vec& s, std::mt19937_64& rng) { return model.sample_action(s, rng); };
    }
    if (!actor) throw FileError("augment: policy checkpoint required for action_source=learned_policy");
    ActorCritic model = *actor;
    return [model](const Vec& s, std::mt19937_64&) { return model.act(s); };
}

int run(int argc, char** argv) {
    CLI::App app{"TATU: uncertainty-driven trajectory truncation for offline RL augmentation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "run configuration JSON")->each([](const std::string&) {});
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--seed", seed, "global seed override")->each([&](const std::string&) { seed_set = true; });

    auto* cmd_defaults = app.add_subcommand("defaults", "print the fully resolved default config");

    auto* cmd_gen = app.add_subcommand("gen-dataset", "collect a behavior dataset");
    std::string ds_out = "dataset.txt";
    cmd_gen->add_option("--dataset-out", ds_out, "dataset file");

    auto* cmd_dyn = app.add_subcommand("train-dynamics", "train the dynamics ensemble");
    std::string ds_in, dyn_out = "dynamics.ckpt";
    cmd_dyn->add_option("--dataset", ds_in, "dataset file")->required();
    cmd_dyn->add_option("--dynamics-out", dyn_out, "checkpoint file");

    auto* cmd_cvae = app.add_subcommand("train-cvae", "train the CVAE rollout policy");
    std::string cvae_out = "cvae.ckpt";
    cmd_cvae->add_option("--dataset", ds_in, "dataset file")->required();
    cmd_cvae->add_option("--cvae-out", cvae_out, "checkpoint file");

    auto* cmd_aug = app.add_subcommand("augment", "generate truncated synthetic trajectories");
    std::string dyn_in, cvae_in, policy_in, buf_out = "buffer.txt";
    cmd_aug->add_option("--dataset", ds_in, "dataset file")->required();
    cmd_aug->add_option("--dynamics", dyn_in, "dynamics checkpoint")->required();
    cmd_aug->add_option("--cvae", cvae_in, "CVAE checkpoint");
    cmd_aug->add_option("--policy", policy_in, "policy checkpoint");
    cmd_aug->add_option("--buffer-out", buf_out, "model buffer file");

    auto* cmd_pol = app.add_subcommand("train-policy", "train the offline learner");
    std::string buf_in, pol_out = "policy.ckpt";
    cmd_pol->add_option("--dataset", ds_in, "dataset file")->required();
    cmd_pol->add_option("--buffer", buf_in, "model buffer file (omit for unaugmented)");
    cmd_pol->add_option("--policy-out", pol_out, "checkpoint file");

    auto* cmd_eval = app.add_subcommand("evaluate", "evaluate a trained policy");
    int eval_episodes = 20;
    cmd_eval->add_option("--policy", policy_in, "policy checkpoint")->required();
    cmd_eval->add_option("--episodes", eval_episodes, "evaluation episodes");

    auto* cmd_bounds = app.add_subcommand("verify-bounds", "run the randomized bound suite");
    int n_instances = 100;
    cmd_bounds->add_option("--instances", n_instances, "number of random instances");

    auto* cmd_sweep = app.add_subcommand("sweep", "parameter study over h, alpha, or eta");
    std::string sweep_param;
    std::string sweep_grid;
    cmd_sweep->add_option("--dataset", ds_in, "dataset file")->required();
    cmd_sweep->add_option("--dynamics", dyn_in, "dynamics checkpoint")->required();
    cmd_sweep->add_option("--cvae", cvae_in, "CVAE checkpoint")->required();
    cmd_sweep->add_option("--param", sweep_param, "h | alpha | eta");
    cmd_sweep->add_option("--grid", sweep_grid, "comma-separated grid values");

    CLI11_PARSE(app, argc, argv);

    if (cmd_defaults->parsed()) {
        std::cout << RunConfig{}.to_json() << "\n";
        return kOk;
    }

    RunConfig cfg = load_config(config_path, seed_set ? &seed : nullptr, out_dir);

    if (cmd_gen->parsed()) {
        Dataset ds = make_dataset(cfg);
        io::save_dataset(ds, cfg.out_dir + "/" + ds_out);
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "gen-dataset");
        mw.write(0, "dataset_size", (double)ds.size(), {{"tier", cfg.env.tier}});
        std::cout << "wrote " << ds.size() << " transitions\n";
        return kOk;
    }

    if (cmd_dyn->parsed()) {
        Dataset ds = io::load_dataset(ds_in);
        DynamicsEnsemble ens = train_ensemble(ds, cfg.dynamics, derive_seed(cfg.seed, 0xD1));
        io::Checkpoint ckpt;
        io::pack_ensemble(ckpt, ens);
        io::save_checkpoint(ckpt, cfg.out_dir + "/" + dyn_out);
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "train-dynamics");
        for (std::size_t m = 0; m < ens.validation_losses.size(); ++m)
            mw.write((long)m, "validation_nll", ens.validation_losses[m]);
        std::cout << "trained " << ens.members.size() << " members, " << ens.elite_indices.size()
                  << " elites\n";
        return kOk;
    }

    if (cmd_cvae->parsed()) {
        Dataset ds = io::load_dataset(ds_in);
        CvaeModel model = train_cvae(ds, cfg.cvae, derive_seed(cfg.seed, 0xC7));
        io::Checkpoint ckpt;
        io::pack_cvae(ckpt, model);
        io::save_checkpoint(ckpt, cfg.out_dir + "/" + cvae_out);
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "train-cvae");
        for (std::size_t e = 0; e < model.loss_history.size(); ++e)
            mw.write((long)e, "cvae_loss", model.loss_history[e]);
        std::cout << "trained CVAE, final loss " << model.loss_history.back() << "\n";
        return kOk;
    }

    if (cmd_aug->parsed()) {
        Dataset ds = io::load_dataset(ds_in);
        DynamicsEnsemble ens = io::unpack_ensemble(io::load_checkpoint(dyn_in));
        std::optional<CvaeModel> cvae;
        std::optional<ActorCritic> actor;
        if (!cvae_in.empty()) cvae = io::unpack_cvae(io::load_checkpoint(cvae_in));
        if (!policy_in.empty()) actor = io::unpack_actor_critic(io::load_checkpoint(policy_in));
        ActionSampler sampler =
            sampler_from(cfg, cvae ? &*cvae : nullptr, actor ? &*actor : nullptr);
        Threshold th;
        AugmentationRun run = augment_from_config(cfg, ens, ds, sampler, &th);
        io::save_buffer(run.buffer, ds.env, cfg.out_dir + "/" + buf_out);
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "augment");
        mw.write(0, "epsilon", th.epsilon);
        mw.write(0, "buffer_size", (double)run.buffer.size());
        mw.write(0, "mean_trajectory_length", run.stats.mean_trajectory_length);
        mw.write(0, "rejection_rate", run.stats.rejection_rate);
        for (std::size_t b = 0; b < run.stats.u_histogram.size(); ++b)
            mw.write((long)b, "u_histogram", (double)run.stats.u_histogram[b]);
        std::cout << "buffer size " << run.buffer.size() << ", mean length "
                  << run.stats.mean_trajectory_length << "\n";
        return kOk;
    }

    if (cmd_pol->parsed()) {
        Dataset ds = io::load_dataset(ds_in);
        std::optional<ModelBuffer> buffer;
        if (!buf_in.empty()) buffer = io::load_buffer(buf_in);
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "train-policy");
        Td3Bc learner = train_policy_mixed(cfg, ds, buffer ? &*buffer : nullptr, &mw);
        io::Checkpoint ckpt;
        io::pack_actor_critic(ckpt, learner.model);
        io::save_checkpoint(ckpt, cfg.out_dir + "/" + pol_out);
        std::cout << "trained policy for " << cfg.learner.steps << " steps\n";
        return kOk;
    }

    if (cmd_eval->parsed()) {
        ActorCritic model = io::unpack_actor_critic(io::load_checkpoint(policy_in));
        EvalResult res = evaluate_actor(cfg, model, eval_episodes, derive_seed(cfg.seed, 0xEA));
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "evaluate");
        mw.write(0, "mean_return", res.mean_return);
        mw.write(0, "mean_discounted_return", res.mean_discounted_return);
        mw.write(0, "std_return", res.std_return);
        std::cout << "mean return " << res.mean_return << " (discounted "
                  << res.mean_discounted_return << ", std " << res.std_return << ")\n";
        return kOk;
    }

    if (cmd_bounds->parsed()) {
        BoundSuiteResult res = run_bound_suite(n_instances, cfg.seed);
        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "verify-bounds");
        mw.write(0, "theorem1_pass", res.theorem1_pass);
        mw.write(0, "lemma1_pass", res.lemma1_pass);
        mw.write(0, "lemma2_pass", res.lemma2_pass);
        mw.write(0, "corollary1_pass", res.corollary1_pass);
        mw.write(0, "min_slack", res.min_slack);
        std::cout << "theorem1 " << res.theorem1_pass << "/" << res.n_instances << ", lemma1 "
                  << res.lemma1_pass << "/" << res.n_instances << ", lemma2 " << res.lemma2_pass
                  << "/" << res.n_instances << ", corollary1 " << res.corollary1_pass << "/"
                  << res.n_instances << ", min slack " << res.min_slack << "\n";
        return res.all_ok ? kOk : 1;
    }

    if (cmd_sweep->parsed()) {
        if (!sweep_param.empty()) cfg.sweep.param = sweep_param;
        std::vector<double> grid = cfg.sweep.grid;
        if (!sweep_grid.empty()) {
            grid.clear();
            std::stringstream ss(sweep_grid);
            std::string tok;
            while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
        }
        if (grid.empty()) grid = default_sweep_grid(cfg.sweep.param);

        Dataset ds = io::load_dataset(ds_in);
        DynamicsEnsemble ens = io::unpack_ensemble(io::load_checkpoint(dyn_in));
        CvaeModel cvae = io::unpack_cvae(io::load_checkpoint(cvae_in));
        ActionSampler sampler =
            [cvae](const Vec& s, std::mt19937_64& rng) { return cvae.sample_action(s, rng); };

        io::MetricWriter mw(cfg.out_dir + "/metrics.jsonl", "sweep");
        std::cout << cfg.sweep.param << "\tbuffer_size\tmean_length\trejection_rate\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            RunConfig c = cfg;
            if (cfg.sweep.param == "h")
                c.truncation.horizon_h = (int)grid[i];
            else if (cfg.sweep.param == "alpha")
                c.truncation.alpha = grid[i];
            else
                c.augment.eta = grid[i];
            Threshold th;
            AugmentationRun run = augment_from_config(c, ens, ds, sampler, &th);
            const std::map<std::string, std::string> tags{
                {"param", cfg.sweep.param}, {"value", std::to_string(grid[i])}};
            mw.write((long)i, "buffer_size", (double)run.buffer.size(), tags);
            mw.write((long)i, "mean_trajectory_length", run.stats.mean_trajectory_length, tags);
            mw.write((long)i, "rejection_rate", run.stats.rejection_rate, tags);
            std::cout << grid[i] << "\t" << run.buffer.size() << "\t"
                      << run.stats.mean_trajectory_length << "\t" << run.stats.rejection_rate
                      << "\n";
        }
        return kOk;
    }

    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const tatu::FileError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return kFileError;
    } catch (const tatu::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kSchemaError;
    } catch (const tatu::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumericError;
    } catch (const tatu::ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const tatu::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kSchemaError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
