// Command-line front end: generate / train / eval / score subcommands.
// Exit codes: 0 ok, 2 usage, 3 contract violation, 4 data/model mismatch.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vad/checkpoint.hpp"
#include "vad/datagen.hpp"
#include "vad/evaluator.hpp"
#include "vad/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitContract = 3;
constexpr int kExitMismatch = 4;

struct GenerateArgs {
    int train = 100;
    int test_normal = 20;
    int test_corrupted = 20;
    std::uint64_t seed = 0;
    std::string out = ".";
    int size = 64;
    int frames = 20;
    int digits = 2;
    int digit_size = 28;
    double speed_min = 2.0;
    double speed_max = 4.0;
    std::string mnist;
    std::string corruption = "both";
};

struct TrainArgs {
    std::string data;
    std::string out = ".";
    int steps = 1000;
    double lr = 1e-3;
    double lr_final_fraction = 1.0;
    int batch = 8;
    std::uint64_t seed = 0;
    int context = 9;
    int hidden = 32;
    int bins = 256;
    int mask_rows = 4;
    int mask_cols = 5;
    int log_interval = 50;
    std::string scope = "all";
    int precision = 32;
    bool no_attention = false;
    bool no_masked_frame = false;
};

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string out = ".";
    int maps = 0;
    std::string scope = "masked";
    std::uint64_t eval_seed = 1234;
    int num_masks = 1;
    int mask_rows = 4;
    int mask_cols = 5;
    int threads = 1;
    int precision = 32;
};

struct ScoreArgs {
    std::string ckpt;
    std::string data;
    std::uint64_t eval_seed = 1234;
    int num_masks = 1;
    std::string scope = "masked";
    int precision = 32;
};

vad::Scope parse_scope(const std::string& s) {
    if (s == "all") return vad::Scope::All;
    if (s == "masked") return vad::Scope::MaskedOnly;
    throw CLI::ValidationError("--scope must be 'all' or 'masked'");
}

vad::CorruptionMode parse_corruption(const std::string& s) {
    if (s == "both") return vad::CorruptionMode::Both;
    if (s == "temporal") return vad::CorruptionMode::TemporalOnly;
    if (s == "spatial") return vad::CorruptionMode::SpatialOnly;
    if (s == "mixed") return vad::CorruptionMode::Mixed;
    throw CLI::ValidationError("--corruption must be both|temporal|spatial|mixed");
}

void echo(const std::string& key, const std::string& value) {
    std::cout << key << "=" << value << "\n";
}

int run_generate(const GenerateArgs& a) {
    echo("command", "generate");
    echo("train", std::to_string(a.train));
    echo("test_normal", std::to_string(a.test_normal));
    echo("test_corrupted", std::to_string(a.test_corrupted));
    echo("seed", std::to_string(a.seed));
    echo("size", std::to_string(a.size));
    echo("digits", std::to_string(a.digits));
    echo("digit_size", std::to_string(a.digit_size));
    echo("corruption", a.corruption);
    echo("out", a.out);

    vad::GenConfig cfg;
    cfg.frame_height = cfg.frame_width = a.size;
    cfg.frames = a.frames;
    cfg.digits = a.digits;
    cfg.digit_size = a.digit_size;
    cfg.speed_min = a.speed_min;
    cfg.speed_max = a.speed_max;
    auto sprites = a.mnist.empty() ? vad::synthetic_sprites() : vad::load_sprites(a.mnist);
    fs::create_directories(a.out);
    auto train_set = vad::build_train_set(a.train, a.seed, sprites, cfg);
    vad::write_dataset((fs::path(a.out) / "train.mmsq").string(), train_set);
    auto test_set = vad::build_test_set(a.test_normal, a.test_corrupted, a.seed + 1, sprites, cfg,
                                        parse_corruption(a.corruption));
    vad::write_dataset((fs::path(a.out) / "test.mmsq").string(), test_set);
    std::cout << "wrote " << train_set.size() << " train and " << test_set.size() << " test sequences\n";
    return kExitOk;
}

template <typename T>
int run_train_typed(const TrainArgs& a) {
    vad::TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.final_lr_fraction = a.lr_final_fraction;
    cfg.batch_size = a.batch;
    cfg.steps = a.steps;
    cfg.seed = a.seed;
    cfg.mask_period_rows = a.mask_rows;
    cfg.mask_period_cols = a.mask_cols;
    cfg.log_interval = a.log_interval;
    cfg.loss_scope = parse_scope(a.scope);
    cfg.hyper.hidden_ch = a.hidden;
    cfg.hyper.att_ch = a.hidden;
    cfg.hyper.meta_hidden = a.hidden;
    cfg.hyper.context_len = a.context;
    cfg.hyper.bins = a.bins;
    cfg.hyper.use_attention = !a.no_attention;
    cfg.hyper.use_masked_frame = !a.no_masked_frame;

    auto dataset = vad::read_dataset(a.data);
    fs::create_directories(a.out);
    std::ofstream log_file(fs::path(a.out) / "train.log");
    auto [params, log] = vad::train<T>(cfg, dataset, &log_file);
    vad::save_checkpoint(params, (fs::path(a.out) / "model.ckpt").string());
    if (!log.empty())
        std::cout << "final mean_nll=" << log.back().mean_nll << " after " << log.back().step << " steps\n";
    std::cout << "checkpoint written to " << (fs::path(a.out) / "model.ckpt").string() << "\n";
    return kExitOk;
}

int run_train(const TrainArgs& a) {
    echo("command", "train");
    echo("data", a.data);
    echo("steps", std::to_string(a.steps));
    echo("lr", std::to_string(a.lr));
    echo("batch", std::to_string(a.batch));
    echo("seed", std::to_string(a.seed));
    echo("context", std::to_string(a.context));
    echo("hidden", std::to_string(a.hidden));
    echo("bins", std::to_string(a.bins));
    echo("scope", a.scope);
    echo("precision", std::to_string(a.precision));
    echo("attention", a.no_attention ? "off" : "on");
    echo("masked_frame", a.no_masked_frame ? "off" : "on");
    echo("out", a.out);
    return a.precision == 64 ? run_train_typed<double>(a) : run_train_typed<float>(a);
}

template <typename T>
int run_eval_typed(const EvalArgs& a) {
    auto params = vad::load_checkpoint<T>(a.ckpt);
    auto dataset = vad::read_dataset(a.data);
    vad::EvalConfig cfg;
    cfg.eval_seed = a.eval_seed;
    cfg.num_masks = a.num_masks;
    cfg.scope = parse_scope(a.scope);
    cfg.mask_period_rows = a.mask_rows;
    cfg.mask_period_cols = a.mask_cols;
    cfg.threads = a.threads;
    auto scored = vad::score_dataset(params, dataset, cfg);

    fs::create_directories(a.out);
    std::ofstream score_file(fs::path(a.out) / "scores.tsv");
    for (const auto& s : scored)
        score_file << s.id << '\t' << (s.corrupted ? "corrupted" : "normal") << '\t' << s.score.mean_nll << '\t'
                   << s.score.total_nll << '\n';

    std::vector<std::pair<bool, double>> labeled;
    for (const auto& s : scored) labeled.emplace_back(s.corrupted, s.score.mean_nll);
    vad::EvalReport report = vad::compute_eer(labeled);
    report.scope = cfg.scope;
    report.checkpoint_id = a.ckpt;

    std::ofstream report_file(fs::path(a.out) / "report.txt");
    report_file << "eer\t" << report.eer << "\n"
                << "one_minus_eer\t" << 1.0 - report.eer << "\n"
                << "threshold_at_eer\t" << report.threshold_at_eer << "\n"
                << "n_normal\t" << report.n_normal << "\n"
                << "n_corrupted\t" << report.n_corrupted << "\n"
                << "scope\t" << (report.scope == vad::Scope::All ? "all" : "masked") << "\n"
                << "checkpoint\t" << report.checkpoint_id << "\n";
    if (!report_file) throw std::runtime_error("eval: cannot write report");

    if (a.maps > 0) {
        std::vector<const vad::ScoredSequence*> by_score;
        for (const auto& s : scored) by_score.push_back(&s);
        std::sort(by_score.begin(), by_score.end(),
                  [](auto* l, auto* r) { return l->score.mean_nll > r->score.mean_nll; });
        for (int i = 0; i < std::min<int>(a.maps, static_cast<int>(by_score.size())); ++i)
            vad::export_loss_map(by_score[i]->loss_map,
                                 (fs::path(a.out) / ("map_" + std::to_string(by_score[i]->id) + ".pgm")).string());
    }
    std::cout << "eer=" << report.eer << " (1-eer=" << 1.0 - report.eer << ") over " << scored.size()
              << " sequences\n";
    return kExitOk;
}

int run_eval(const EvalArgs& a) {
    echo("command", "eval");
    echo("ckpt", a.ckpt);
    echo("data", a.data);
    echo("scope", a.scope);
    echo("eval_seed", std::to_string(a.eval_seed));
    echo("num_masks", std::to_string(a.num_masks));
    echo("threads", std::to_string(a.threads));
    echo("maps", std::to_string(a.maps));
    echo("out", a.out);
    return a.precision == 64 ? run_eval_typed<double>(a) : run_eval_typed<float>(a);
}

template <typename T>
int run_score_typed(const ScoreArgs& a) {
    auto params = vad::load_checkpoint<T>(a.ckpt);
    auto dataset = vad::read_dataset(a.data);
    if (dataset.empty()) throw std::runtime_error("score: dataset is empty");
    vad::EvalConfig cfg;
    cfg.eval_seed = a.eval_seed;
    cfg.num_masks = a.num_masks;
    cfg.scope = parse_scope(a.scope);
    const auto masks = vad::evaluation_masks(cfg, dataset[0].sequence.frames[0].height,
                                             dataset[0].sequence.frames[0].width);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto scored = vad::score_sequence(params, dataset[i], masks, cfg, static_cast<int>(i));
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "mean_nll=" << scored.score.mean_nll << " ms=" << ms << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Video anomaly detector: masked frame inpainting over a ConvLSTM context"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Optional key=value config file; flags override file values");

    GenerateArgs gen;
    auto* cg = app.add_subcommand("generate", "Generate train/test moving-digit datasets");
    cg->add_option("--train", gen.train, "Normal training sequences");
    cg->add_option("--test-normal", gen.test_normal, "Normal test sequences");
    cg->add_option("--test-corrupted", gen.test_corrupted, "Corrupted test sequences");
    cg->add_option("--seed", gen.seed, "Generation seed");
    cg->add_option("--out", gen.out, "Output directory");
    cg->add_option("--size", gen.size, "Frame height/width");
    cg->add_option("--frames", gen.frames, "Frames per sequence");
    cg->add_option("--digits", gen.digits, "Digits per sequence");
    cg->add_option("--digit-size", gen.digit_size, "Sprite size after rescale");
    cg->add_option("--speed-min", gen.speed_min, "Minimum digit speed (pixels/frame)");
    cg->add_option("--speed-max", gen.speed_max, "Maximum digit speed (pixels/frame)");
    cg->add_option("--mnist", gen.mnist, "IDX3 digit file (procedural glyphs when absent)");
    cg->add_option("--corruption", gen.corruption, "both|temporal|spatial|mixed");

    TrainArgs tr;
    auto* ct = app.add_subcommand("train", "Train on an all-normal dataset");
    ct->add_option("--data", tr.data, "Training MMSQ file")->required();
    ct->add_option("--out", tr.out, "Output directory (checkpoint + log)");
    ct->add_option("--steps", tr.steps, "Optimization steps");
    ct->add_option("--lr", tr.lr, "Learning rate");
    ct->add_option("--lr-final-fraction", tr.lr_final_fraction, "Cosine-decay floor as a fraction of --lr (1 = constant)");
    ct->add_option("--batch", tr.batch, "Batch size");
    ct->add_option("--seed", tr.seed, "Training seed");
    ct->add_option("--context", tr.context, "Context window length");
    ct->add_option("--hidden", tr.hidden, "Hidden channel count");
    ct->add_option("--bins", tr.bins, "Intensity bins K");
    ct->add_option("--mask-period-rows", tr.mask_rows, "Grid mask row period");
    ct->add_option("--mask-period-cols", tr.mask_cols, "Grid mask column period");
    ct->add_option("--log-interval", tr.log_interval, "Steps between log records");
    ct->add_option("--scope", tr.scope, "Loss scope: all|masked");
    ct->add_option("--precision", tr.precision, "32 or 64");
    ct->add_flag("--no-attention", tr.no_attention, "Static filters instead of the meta-network");
    ct->add_flag("--no-masked-frame", tr.no_masked_frame, "Drop the masked-frame decoder input");

    EvalArgs ev;
    auto* ce = app.add_subcommand("eval", "Score a labeled dataset and compute EER");
    ce->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
    ce->add_option("--data", ev.data, "Labeled MMSQ file")->required();
    ce->add_option("--out", ev.out, "Output directory (report, scores, maps)");
    ce->add_option("--maps", ev.maps, "Export P5 loss maps for the k worst frames");
    ce->add_option("--scope", ev.scope, "Score scope: all|masked");
    ce->add_option("--eval-seed", ev.eval_seed, "Evaluation mask seed");
    ce->add_option("--num-masks", ev.num_masks, "Masks averaged per score");
    ce->add_option("--mask-period-rows", ev.mask_rows, "Grid mask row period");
    ce->add_option("--mask-period-cols", ev.mask_cols, "Grid mask column period");
    ce->add_option("--threads", ev.threads, "Worker threads (1 = bit-exact)");
    ce->add_option("--precision", ev.precision, "32 or 64");

    ScoreArgs sc;
    auto* cs = app.add_subcommand("score", "Score sequences from one file to stdout");
    cs->add_option("--ckpt", sc.ckpt, "Checkpoint file")->required();
    cs->add_option("--data", sc.data, "MMSQ file")->required();
    cs->add_option("--eval-seed", sc.eval_seed, "Evaluation mask seed");
    cs->add_option("--num-masks", sc.num_masks, "Masks averaged per score");
    cs->add_option("--scope", sc.scope, "Score scope: all|masked");
    cs->add_option("--precision", sc.precision, "32 or 64");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cg->parsed()) return run_generate(gen);
        if (ct->parsed()) return run_train(tr);
        if (ce->parsed()) return run_eval(ev);
        if (cs->parsed()) return sc.precision == 64 ? run_score_typed<double>(sc) : run_score_typed<float>(sc);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        // invalid arguments to train are contract violations (e.g. a
        // corrupted sequence in the training set)
        return ct->parsed() ? kExitContract : kExitMismatch;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
    }
    return kExitUsage;
}
