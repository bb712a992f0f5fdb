#include "clair/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "clair/checkpoint.hpp"
#include "clair/config.hpp"
#include "clair/error.hpp"
#include "clair/eval.hpp"
#include "clair/mapping.hpp"
#include "clair/pseudo_labels.hpp"
#include "clair/synthetic.hpp"
#include "clair/trainer.hpp"

namespace clair {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::IoError, "SHA-256 digest failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

namespace {

std::size_t resolve_threads(std::optional<std::size_t> flag) {
    if (flag) return std::max<std::size_t>(*flag, 1);
    if (const char* env = std::getenv("CLAIR_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return v;
    }
    return 1;
}

json manifest(const std::string& command, const json& config, std::uint64_t seed, const std::vector<fs::path>& inputs) {
    json digests = json::object();
    for (const fs::path& p : inputs) digests[p.filename().string()] = sha256_file(p);
    return {{"tool", "clair"}, {"version", kToolVersion}, {"command", command},
            {"seed", seed}, {"config", config}, {"inputs", digests}};
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::vector<std::size_t> usable_ks(const std::vector<std::size_t>& ks, std::size_t gallery) {
    std::vector<std::size_t> out;
    for (std::size_t k : ks)
        if (k <= gallery) out.push_back(k);
    return out;
}

json bidirectional_json(const std::pair<RetrievalReport, RetrievalReport>& r) {
    return json::array({to_json(r.first), to_json(r.second)});
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- synth

struct SynthArgs {
    SyntheticConfig cfg;
    fs::path out;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
    const SyntheticData data = generate_synthetic_pair(a.cfg);
    fs::create_directories(a.out);
    auto [train_a, test_a] = split_by_class(data.a, a.cfg.n_classes_train);
    auto [train_b, test_b] = split_by_class(data.b, a.cfg.n_classes_train);
    const std::vector<std::pair<std::string, const EmbeddingSet*>> sets = {
        {"train_a.emb1", &train_a}, {"train_b.emb1", &train_b}, {"test_a.emb1", &test_a}, {"test_b.emb1", &test_b}};
    std::vector<fs::path> written;
    for (const auto& [name, set] : sets) {
        if (set->size() == 0) continue;
        write_embedding_set(*set, a.out / name);
        written.push_back(a.out / name);
    }
    write_anchor_set(data.anchors_a, a.out / "anchors_a.emb1");
    write_anchor_set(data.anchors_b, a.out / "anchors_b.emb1");
    written.push_back(a.out / "anchors_a.emb1");
    written.push_back(a.out / "anchors_b.emb1");

    json m = manifest("synth", to_json(a.cfg), a.cfg.seed, {});
    json digests = json::object();
    for (const fs::path& p : written) digests[p.filename().string()] = sha256_file(p);
    m["outputs"] = digests;
    m["corrupted_classes"] = data.corrupted_classes;
    write_json(a.out / "manifest.json", m);
    out << "wrote " << written.size() << " EMB1 files to " << a.out.string() << "\n";
}

// ---- init-labels

struct InitArgs {
    fs::path features, anchors, out;
    std::string name;
};

void run_init(const InitArgs& a, std::ostream& out) {
    const EmbeddingSet f = read_embedding_set(a.features);
    const AnchorSet w = read_anchor_set(a.anchors);
    const PseudoLabelMatrix labels = init_pseudo_labels(f, w);
    write_labels(labels, w.class_names, a.name.empty() ? f.domain : a.name, a.out);
    out << "labels " << labels.rows() << " x " << labels.classes();
    if (auto acc = known_label_accuracy(labels, truth_in_anchor_space(f, w))) out << "  accuracy " << *acc;
    out << "\n";
}

// ---- refine

struct RefineArgs {
    fs::path labels, features, anchors, out;
    RefineConfig cfg;
    std::optional<std::size_t> threads;
};

void run_refine(const RefineArgs& a, std::ostream& out) {
    const PseudoLabelMatrix before = read_labels(a.labels);
    const EmbeddingSet f = read_embedding_set(a.features);
    const AnchorSet w = read_anchor_set(a.anchors);
    Matrix bank = f.vectors;
    normalize_rows(bank);
    const PseudoLabelMatrix after = refine(before, bank, w.anchors, a.cfg, resolve_threads(a.threads));
    std::string domain;
    read_matrix(a.labels, &domain);
    const std::string name = domain.rfind("pseudo:", 0) == 0 ? domain.substr(7) : f.domain;
    write_labels(after, w.class_names, name, a.out);
    out << "refined " << after.rows() << " rows for " << a.cfg.n_r << " steps, " << count_changes(before, after)
        << " assignments changed";
    if (auto acc = known_label_accuracy(after, truth_in_anchor_space(f, w))) out << "  accuracy " << *acc;
    out << "\n";
}

// ---- map

struct MapArgs {
    fs::path anchors_a, anchors_b, out, apply, apply_out;
    bool raw = false;
};

void run_map(const MapArgs& a, std::ostream& out, std::ostream& err) {
    const AnchorSet wa = read_anchor_set(a.anchors_a);
    const AnchorSet wb = read_anchor_set(a.anchors_b);
    const ProcrustesResult r = solve_procrustes(wa.anchors, wb.anchors, {!a.raw, true});
    MappingMatrix map = r.map;
    map.source = wa.domain;
    map.target = wb.domain;
    if (r.rank_deficient) err << "warning: RankDeficient: smallest singular value below 1e-10 of the largest\n";
    if (r.underdetermined) err << "warning: fewer anchor pairs (" << wa.count() << ") than dimensions (" << wa.dim() << ")\n";
    write_mapping(map, a.out);
    out << "omega " << map.dim() << " x " << map.dim() << " residual "
        << procrustes_residual(map.omega, wa.anchors, wb.anchors) << "\n";
    if (!a.apply.empty()) {
        if (a.apply_out.empty()) fail(ErrorKind::ConfigError, "--apply needs --apply-out");
        write_embedding_set(apply_mapping(map, read_embedding_set(a.apply)), a.apply_out);
    }
}

// ---- train

struct TrainArgs {
    std::optional<fs::path> config;
    std::optional<std::string> preset_name;
    fs::path data, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, batch_size, refine_steps, patience, d_out, threads, val_per_class;
    std::optional<double> lr, momentum, w_kl, w_ii, w_ic, w_id, tau, c_psi, lambda_psi, augment_noise, augment_dropout;
    std::optional<std::string> direction, head_init;
    bool no_mapping = false;
    bool freeze_omega = false;
    std::vector<std::string> argv;
};

TrainConfig resolve_train_config(const TrainArgs& a) {
    json file;
    if (a.config) {
        try {
            file = json::parse(read_file(*a.config));
        } catch (const json::exception& e) {
            fail(ErrorKind::ConfigError, std::string("unreadable config file: ") + e.what());
        }
        if (!file.is_object()) fail(ErrorKind::ConfigError, "config file must hold a JSON object");
    }
    TrainConfig cfg;
    std::optional<std::string> name = a.preset_name;
    if (!name && file.contains("preset")) name = file.at("preset").get<std::string>();
    if (name) cfg = preset(*name);
    if (!file.is_null()) apply_json(cfg, file);

    auto set = [](auto& dst, const auto& src) {
        if (src) dst = *src;
    };
    set(cfg.seed, a.seed);
    set(cfg.epochs, a.epochs);
    set(cfg.batch_size, a.batch_size);
    set(cfg.refine.n_r, a.refine_steps);
    set(cfg.patience, a.patience);
    set(cfg.head.d_out, a.d_out);
    set(cfg.val_per_class, a.val_per_class);
    set(cfg.lr0, a.lr);
    set(cfg.m, a.momentum);
    set(cfg.weights.w_kl, a.w_kl);
    set(cfg.weights.w_ii, a.w_ii);
    set(cfg.weights.w_ic, a.w_ic);
    set(cfg.weights.w_id, a.w_id);
    set(cfg.weights.tau, a.tau);
    set(cfg.refine.c_psi, a.c_psi);
    set(cfg.refine.lambda_psi, a.lambda_psi);
    set(cfg.augment.noise_sigma, a.augment_noise);
    set(cfg.augment.dropout_p, a.augment_dropout);
    set(cfg.direction, a.direction);
    if (a.head_init) {
        json j = {{"head_init", *a.head_init}};
        apply_json(cfg, j);
    }
    if (a.no_mapping) cfg.use_mapping = false;
    if (a.freeze_omega) cfg.omega_trainable = false;
    cfg.threads = a.threads ? std::max<std::size_t>(*a.threads, 1)
                            : (file.contains("threads") ? cfg.threads : resolve_threads(std::nullopt));
    cfg.validate();
    return cfg;
}

void run_train(const TrainArgs& a, std::ostream& out) {
    const TrainConfig cfg = resolve_train_config(a);
    const fs::path pa = a.data / "train_a.emb1", pb = a.data / "train_b.emb1";
    const fs::path wa_path = a.data / "anchors_a.emb1", wb_path = a.data / "anchors_b.emb1";
    const EmbeddingSet set_a = read_embedding_set(pa), set_b = read_embedding_set(pb);
    const AnchorSet wa = read_anchor_set(wa_path), wb = read_anchor_set(wb_path);
    std::vector<fs::path> inputs{pa, pb, wa_path, wb_path};

    const TrainState st = train(set_a, set_b, wa, wb, cfg);
    write_checkpoint(a.out, st, cfg, wa.class_names);

    json report = {
        {"version", kToolVersion},
        {"seed", cfg.seed},
        {"epochs_run", st.history.size()},
        {"best_epoch", st.best_epoch},
        {"stopped_early", st.stopped_early},
        {"initial_val_p50", optional_json(st.initial_val_p50)},
        {"final_val_p50", optional_json(validation_score(st, cfg))},
        {"label_accuracy",
         {{"initial_a", optional_json(st.initial_label_accuracy_a)},
          {"initial_b", optional_json(st.initial_label_accuracy_b)},
          {"final_a", optional_json(known_label_accuracy(st.labels_a, truth_in_anchor_space(st.train_a, wa)))},
          {"final_b", optional_json(known_label_accuracy(st.labels_b, truth_in_anchor_space(st.train_b, wb)))}}},
    };
    const fs::path ta = a.data / "test_a.emb1", tb = a.data / "test_b.emb1";
    if (fs::exists(ta) && fs::exists(tb)) {
        const EmbeddingSet test_a = read_embedding_set(ta), test_b = read_embedding_set(tb);
        inputs.push_back(ta);
        inputs.push_back(tb);
        if (test_a.has_labels() && test_b.has_labels()) {
            const auto ks = usable_ks({10, 50, 100, 200}, std::min(test_a.size(), test_b.size()));
            report["test"] = bidirectional_json(bidirectional_report(test_a, test_b, st.k, cfg.a_mapped(), ks, cfg.threads));
        }
    }
    write_json(a.out / "report.json", report);
    json m = manifest("train", to_json(cfg), cfg.seed, inputs);
    m["data"] = a.data.string();
    m["args"] = a.argv;
    m["threads"] = cfg.threads;
    write_json(a.out / "manifest.json", m);

    out << "trained " << st.history.size() << " epochs, best epoch " << st.best_epoch;
    if (auto v = validation_score(st, cfg)) out << ", val P@50 " << *v;
    out << "\n";
}

// ---- eval

struct EvalArgs {
    fs::path checkpoint, data, a, b, out, text, pr_dir;
    std::vector<std::size_t> ks{50, 100, 200};
    std::optional<std::size_t> threads;
};

void run_eval(const EvalArgs& e, std::ostream& out) {
    const Checkpoint ck = read_checkpoint(e.checkpoint);
    fs::path pa = e.a, pb = e.b;
    if (pa.empty()) pa = e.data / "test_a.emb1";
    if (pb.empty()) pb = e.data / "test_b.emb1";
    const EmbeddingSet set_a = read_embedding_set(pa), set_b = read_embedding_set(pb);
    const auto reports = bidirectional_report(set_a, set_b, ck.k, ck.config.a_mapped(), e.ks, resolve_threads(e.threads));

    std::string text = render_text(reports.first) + render_text(reports.second);
    out << text;
    if (!e.out.empty()) {
        json m = manifest("eval", to_json(ck.config), ck.config.seed, {pa, pb, e.checkpoint / "head_k.emb1"});
        write_json(e.out, {{"reports", bidirectional_json(reports)}, {"manifest", m}});
    }
    if (!e.text.empty()) write_file_atomic(e.text, text);
    if (!e.pr_dir.empty()) {
        fs::create_directories(e.pr_dir);
        write_file_atomic(e.pr_dir / "pr_a_to_b.tsv", render_pr_tsv(reports.first));
        write_file_atomic(e.pr_dir / "pr_b_to_a.tsv", render_pr_tsv(reports.second));
    }
}

// ---- report

struct ReportArgs {
    fs::path log, eval, pr_dir;
};

std::string render_log(const std::string& jsonl) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%5s %10s %9s %9s %9s %9s %9s %9s %8s %8s\n", "epoch", "lr", "total", "kl", "ii", "ic",
                  "id", "val_p50", "chg_a", "chg_b");
    out << buf;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const json& l = j.at("loss");
        const double val = j.at("val_p50").is_null() ? -1.0 : j.at("val_p50").get<double>();
        std::snprintf(buf, sizeof buf, "%5zu %10.3e %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %8zu %8zu\n",
                      j.at("epoch").get<std::size_t>(), j.at("lr").get<double>(), j.at("total").get<double>(),
                      l.at("kl").get<double>(), l.at("ii").get<double>(), l.at("ic").get<double>(),
                      l.at("id").get<double>(), val, j.at("label_changes_a").get<std::size_t>(),
                      j.at("label_changes_b").get<std::size_t>());
        out << buf;
    }
    return out.str();
}

void run_report(const ReportArgs& r, std::ostream& out) {
    if (r.log.empty() && r.eval.empty()) fail(ErrorKind::ConfigError, "report needs --log or --eval");
    try {
        if (!r.log.empty()) out << render_log(read_file(r.log));
        if (!r.eval.empty()) {
            const json j = json::parse(read_file(r.eval));
            const json& list = j.contains("reports") ? j.at("reports") : j.at("test");
            std::size_t n = 0;
            for (const json& item : list) {
                const RetrievalReport rep = report_from_json(item);
                out << render_text(rep);
                if (!r.pr_dir.empty()) {
                    fs::create_directories(r.pr_dir);
                    write_file_atomic(r.pr_dir / ("pr_" + std::to_string(n) + ".tsv"), render_pr_tsv(rep));
                }
                ++n;
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("unreadable report input: ") + e.what());
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weakly supervised zero-shot cross-domain retrieval on precomputed embeddings", "clair"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a synthetic two-domain dataset bundle");
    s->add_option("--classes-train", synth.cfg.n_classes_train)->capture_default_str();
    s->add_option("--classes-test", synth.cfg.n_classes_test)->capture_default_str();
    s->add_option("--per-class", synth.cfg.per_class)->capture_default_str();
    s->add_option("--dim", synth.cfg.dim)->capture_default_str();
    s->add_option("--noise", synth.cfg.noise_sigma)->capture_default_str();
    s->add_option("--anchor-noise", synth.cfg.anchor_noise)->capture_default_str();
    s->add_option("--corrupt", synth.cfg.corrupt_fraction, "Fraction of corrupted anchors")->capture_default_str();
    s->add_option("--corrupt-margin", synth.cfg.corrupt_margin)->capture_default_str();
    s->add_flag("--identity-rotation", synth.cfg.identity_rotation);
    s->add_option("--seed", synth.cfg.seed)->capture_default_str();
    s->add_option("--out", synth.out)->required();

    InitArgs init;
    auto* i = app.add_subcommand("init-labels", "Initialize pseudo-labels from anchor cosines");
    i->add_option("--features", init.features)->required()->check(CLI::ExistingFile);
    i->add_option("--anchors", init.anchors)->required()->check(CLI::ExistingFile);
    i->add_option("--out", init.out)->required();
    i->add_option("--name", init.name);

    RefineArgs ref;
    auto* r = app.add_subcommand("refine", "Refine pseudo-labels against input-space features");
    r->add_option("--labels", ref.labels)->required()->check(CLI::ExistingFile);
    r->add_option("--features", ref.features)->required()->check(CLI::ExistingFile);
    r->add_option("--anchors", ref.anchors)->required()->check(CLI::ExistingFile);
    r->add_option("--out", ref.out)->required();
    r->add_option("--steps", ref.cfg.n_r)->capture_default_str();
    r->add_option("--c-psi", ref.cfg.c_psi)->capture_default_str();
    r->add_option("--lambda-psi", ref.cfg.lambda_psi)->capture_default_str();
    r->add_option("--threads", ref.threads);

    MapArgs map;
    auto* m = app.add_subcommand("map", "Solve the orthogonal mapping between paired anchors");
    m->add_option("--anchors-a", map.anchors_a)->required()->check(CLI::ExistingFile);
    m->add_option("--anchors-b", map.anchors_b)->required()->check(CLI::ExistingFile);
    m->add_option("--out", map.out)->required();
    m->add_flag("--raw", map.raw, "Use anchors without L2 normalization");
    m->add_option("--apply", map.apply, "Embedding set to map")->check(CLI::ExistingFile);
    m->add_option("--apply-out", map.apply_out);

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Run the full training loop");
    t->add_option("--config", tr.config)->check(CLI::ExistingFile);
    t->add_option("--preset", tr.preset_name)->check(CLI::IsMember(preset_names()));
    t->add_option("--data", tr.data)->required()->check(CLI::ExistingDirectory);
    t->add_option("--out", tr.out)->required();
    t->add_option("--seed", tr.seed);
    t->add_option("--epochs", tr.epochs);
    t->add_option("--batch-size", tr.batch_size);
    t->add_option("--lr", tr.lr);
    t->add_option("--momentum", tr.momentum);
    t->add_option("--w-kl", tr.w_kl);
    t->add_option("--w-ii", tr.w_ii);
    t->add_option("--w-ic", tr.w_ic);
    t->add_option("--w-id", tr.w_id);
    t->add_option("--tau", tr.tau);
    t->add_option("--c-psi", tr.c_psi);
    t->add_option("--lambda-psi", tr.lambda_psi);
    t->add_option("--refine-steps", tr.refine_steps);
    t->add_option("--augment-noise", tr.augment_noise);
    t->add_option("--augment-dropout", tr.augment_dropout);
    t->add_option("--patience", tr.patience);
    t->add_option("--d-out", tr.d_out);
    t->add_option("--val-per-class", tr.val_per_class);
    t->add_option("--direction", tr.direction)->check(CLI::IsMember({"a2b", "b2a"}));
    t->add_option("--head-init", tr.head_init)->check(CLI::IsMember({"orthogonal", "gaussian"}));
    t->add_flag("--no-mapping", tr.no_mapping);
    t->add_flag("--freeze-omega", tr.freeze_omega);
    t->add_option("--threads", tr.threads);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score a checkpoint bidirectionally");
    e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingDirectory);
    auto* data_opt = e->add_option("--data", ev.data, "Directory with test_a.emb1 and test_b.emb1");
    auto* a_opt = e->add_option("--a", ev.a)->check(CLI::ExistingFile);
    e->add_option("--b", ev.b)->check(CLI::ExistingFile)->needs(a_opt);
    a_opt->excludes(data_opt);
    e->add_option("--k", ev.ks)->delimiter(',')->capture_default_str();
    e->add_option("--out", ev.out, "JSON report path");
    e->add_option("--text", ev.text, "Aligned text report path");
    e->add_option("--pr-dir", ev.pr_dir, "Directory for recall/precision TSV files");
    e->add_option("--threads", ev.threads);

    ReportArgs rep;
    auto* p = app.add_subcommand("report", "Render a training log or evaluation report");
    p->add_option("--log", rep.log)->check(CLI::ExistingFile);
    p->add_option("--eval", rep.eval)->check(CLI::ExistingFile);
    p->add_option("--pr-dir", rep.pr_dir);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return 2;
    }

    tr.argv = args;
    try {
        if (s->parsed()) run_synth(synth, out);
        else if (i->parsed()) run_init(init, out);
        else if (r->parsed()) run_refine(ref, out);
        else if (m->parsed()) run_map(map, out, err);
        else if (t->parsed()) run_train(tr, out);
        else if (e->parsed()) run_eval(ev, out);
        else if (p->parsed()) run_report(rep, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& ex) {
        err << "error: " << error_name(ErrorKind::IoError) << ": " << ex.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace clair
