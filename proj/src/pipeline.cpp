#include "clc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "clc/dialogue.hpp"
#include "clc/error.hpp"
#include "clc/heads.hpp"
#include "clc/manifest.hpp"
#include "clc/metrics.hpp"
#include "clc/rephrase.hpp"

namespace clc {

using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& key, const std::string& what) {
    throw Error(ErrorKind::InvalidConfig, "config key '" + key + "': " + what);
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
    if (!j.is_object()) bad_config(where, "must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            bad_config(where.empty() ? key : where + "." + key, "unknown key");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, const std::string& where, T& out) {
    if (!j.contains(key)) return;
    const std::string name = where.empty() ? key : where + "." + key;
    const json& v = j[key];
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) bad_config(name, "must be a boolean");
        out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) bad_config(name, "must be a number");
        out = v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_unsigned()) bad_config(name, "must be a non-negative integer");
        out = v.get<T>();
    } else {
        if (!v.is_string()) bad_config(name, "must be a string");
        out = v.get<std::string>();
    }
}

template <typename Real>
double frobenius(std::span<const Real> v) {
    double s = 0;
    for (Real x : v) s += double(x) * double(x);
    return std::sqrt(s);
}

template <typename Real>
double param_grad_norm(const BasicHeadParamGrads<Real>& g) {
    double s = 0;
    for (auto part : {g.w1.values(), g.b1.values(), g.ln_gamma.values(), g.ln_beta.values(), g.w2.values(),
                      g.b2.values()}) {
        const double n = frobenius<Real>(part);
        s += n * n;
    }
    return std::sqrt(s);
}

template <typename Real>
BasicVector<Real> row_vector(const BasicMatrix<Real>& m, std::size_t r) {
    auto row = m.row(r);
    return BasicVector<Real>(std::vector<Real>(row.begin(), row.end()));
}

template <typename Real>
BasicMatrix<Real> stack_rows(const std::vector<BasicVector<Real>>& rows, std::size_t d) {
    std::vector<Real> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) data.insert(data.end(), r.values().begin(), r.values().end());
    return BasicMatrix<Real>(rows.size(), d, std::move(data));
}

struct PfSample {
    std::string turn_id;
    Matrix current;
    Matrix past;
    std::optional<Matrix> future;
};

struct NBestSample {
    std::string turn_id;
    Matrix frames;
    Matrix hypotheses;
    bool rephrase = false;
};

struct LossOutcome {
    json pf;
    json nbest;
    double l_pf = 0;
    double l_nbest = 0;
};

template <typename Real>
LossOutcome evaluate_losses(const std::vector<PfSample>& pf_samples, const std::vector<NBestSample>& nb_samples,
                            std::size_t k, const RunConfig& cfg) {
    const std::size_t d = cfg.heads.out_dim;
    const std::size_t h = cfg.heads.hidden_dim == 0 ? d : cfg.heads.hidden_dim;
    const auto heads = BasicHeadSet<Real>::random(k, h, d, cfg.seed, cfg.heads.dropout_rate);

    LossConfig loss_cfg = cfg.loss;
    if (cfg.mask_future) loss_cfg.alpha = 0.0;

    LossOutcome out;
    const std::size_t n = pf_samples.size();
    if (n >= 2) {
        std::vector<BasicHeadForward<Real>> cur, past, fut;
        for (const auto& s : pf_samples) {
            cur.push_back(head_forward(heads.current, cast<Real>(s.current), HeadMode::eval));
            past.push_back(head_forward(heads.past, cast<Real>(s.past), HeadMode::eval));
            if (!cfg.mask_future) fut.push_back(head_forward(heads.future, cast<Real>(*s.future), HeadMode::eval));
        }
        auto outputs = [&](const std::vector<BasicHeadForward<Real>>& f) {
            std::vector<BasicVector<Real>> rows;
            for (const auto& x : f) rows.push_back(x.output);
            return stack_rows(rows, d);
        };
        BasicPfBatch<Real> batch{outputs(cur), outputs(past), cfg.mask_future ? BasicMatrix<Real>() : outputs(fut)};

        const std::size_t chunk = std::min(cfg.chunk_size, n);
        const auto r = chunk == 0 ? pf_loss(batch, loss_cfg) : pf_loss_chunked(batch, loss_cfg, chunk);

        auto head_norm = [&](const BasicHeadParams<Real>& p, const std::vector<BasicHeadForward<Real>>& f,
                             const BasicMatrix<Real>& g) {
            auto acc = BasicHeadParamGrads<Real>::zeros_like(p);
            for (std::size_t i = 0; i < f.size(); ++i) acc.accumulate(head_backward(p, f[i].trace, row_vector(g, i)).params);
            return param_grad_norm(acc);
        };

        out.l_pf = double(r.loss);
        out.pf = {
            {"evaluated", true},
            {"samples", n},
            {"loss", double(r.loss)},
            {"future_mean", cfg.mask_future ? json(nullptr) : json(double(r.future_mean))},
            {"past_mean", double(r.past_mean)},
            {"chunk_size", chunk},
            {"peak_similarity_workspace", r.peak_similarity_workspace},
            {"grad_norms",
             {{"current", frobenius<Real>(r.grads.current.values())},
              {"past", frobenius<Real>(r.grads.past.values())},
              {"future", cfg.mask_future ? json(nullptr) : json(frobenius<Real>(r.grads.future.values()))},
              {"head_current", head_norm(heads.current, cur, r.grads.current)},
              {"head_past", head_norm(heads.past, past, r.grads.past)},
              {"head_future",
               cfg.mask_future ? json(nullptr) : json(head_norm(heads.future, fut, r.grads.future))}}},
        };
    } else {
        out.pf = {{"evaluated", false}, {"samples", n}, {"loss", 0.0}};
    }

    if (!nb_samples.empty()) {
        std::vector<BasicHeadForward<Real>> cur;
        BasicNBestBatch<Real> batch;
        std::vector<BasicVector<Real>> rows;
        for (const auto& s : nb_samples) {
            cur.push_back(head_forward(heads.current, cast<Real>(s.frames), HeadMode::eval));
            rows.push_back(cur.back().output);
            batch.hypotheses.push_back(cast<Real>(s.hypotheses));
            batch.labels.push_back(s.rephrase ? NBestLabel::rephrase : NBestLabel::success);
        }
        batch.current = stack_rows(rows, d);
        const auto r = nbest_loss(batch, loss_cfg);

        double hyp_sq = 0;
        for (const auto& g : r.grads.hypotheses) {
            const double x = frobenius<Real>(g.values());
            hyp_sq += x * x;
        }
        auto acc = BasicHeadParamGrads<Real>::zeros_like(heads.current);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            acc.accumulate(head_backward(heads.current, cur[i].trace, row_vector(r.grads.current, i)).params);
        }

        out.l_nbest = double(r.loss);
        out.nbest = {
            {"evaluated", true},
            {"samples", nb_samples.size()},
            {"rephrase_samples", r.rephrase_count},
            {"success_samples", r.success_count},
            {"loss", double(r.loss)},
            {"negative_mean", double(r.negative_mean)},
            {"positive_mean", double(r.positive_mean)},
            {"grad_norms",
             {{"current", frobenius<Real>(r.grads.current.values())},
              {"hypotheses", std::sqrt(hyp_sq)},
              {"head_current", param_grad_norm(acc)}}},
        };
    } else {
        out.nbest = {{"evaluated", false}, {"samples", 0}, {"loss", 0.0}};
    }
    return out;
}

json score_json(const CorpusScore& s) {
    return {{"wer", s.wer},
            {"ser", s.ser},
            {"n_utterances", s.n_utterances},
            {"n_ref_words", s.n_ref_words},
            {"substitutions", s.substitutions},
            {"deletions", s.deletions},
            {"insertions", s.insertions}};
}

// Sentence vector for detection: the semantic embedding when present,
// otherwise the mean of the turn's frames.
std::optional<Vector> detection_vector(const Turn& t, EmbeddingStore& store) {
    if (t.semantic_ref) return mean_pool_rows(store.load(*t.semantic_ref));
    if (t.embedding_ref) return mean_pool_rows(store.load(*t.embedding_ref));
    return std::nullopt;
}

json label_json(const RephraseLabel& l, const std::string& origin) {
    return {{"kind", std::string(to_string(l.kind))},
            {"turn_id", l.turn_id},
            {"source_turn_id", l.source_turn_id},
            {"origin", origin}};
}

} // namespace

void HeadConfig::validate() const {
    if (out_dim == 0) throw Error(ErrorKind::InvalidConfig, "heads.out_dim must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "heads.dropout_rate must lie in [0, 1)");
    }
}

void RunConfig::validate() const {
    loss.validate();
    session.validate();
    injection.validate();
    heads.validate();
    if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "similarity_threshold must lie in (0, 1]");
    }
    if (!(deletion_rate_threshold >= 0.0 && deletion_rate_threshold <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "deletion_rate_threshold must lie in [0, 1]");
    }
    if (!std::isfinite(l_asr)) throw Error(ErrorKind::InvalidConfig, "l_asr must be finite");
}

std::string_view to_string(Precision p) {
    return p == Precision::verify ? "verify" : "fast";
}

std::optional<Precision> parse_precision(std::string_view s) {
    if (s == "verify") return Precision::verify;
    if (s == "fast") return Precision::fast;
    return std::nullopt;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j, "",
                   {"loss", "session", "injection", "heads", "similarity_threshold", "deletion_rate_threshold", "seed",
                    "mode", "chunk_size", "mask_future", "l_asr", "rephrase_mapping", "in", "out"});
    RunConfig cfg;
    if (j.contains("loss")) {
        const json& l = j["loss"];
        reject_unknown(l, "loss", {"alpha", "beta", "tau", "gamma", "kappa", "lambda", "delta", "smooth_negative"});
        read(l, "alpha", "loss", cfg.loss.alpha);
        read(l, "beta", "loss", cfg.loss.beta);
        read(l, "tau", "loss", cfg.loss.tau);
        read(l, "gamma", "loss", cfg.loss.gamma);
        read(l, "kappa", "loss", cfg.loss.kappa);
        read(l, "lambda", "loss", cfg.loss.lambda);
        read(l, "delta", "loss", cfg.loss.delta);
        read(l, "smooth_negative", "loss", cfg.loss.smooth_negative);
    }
    if (j.contains("session")) {
        const json& s = j["session"];
        reject_unknown(s, "session", {"rho_initial_s", "rho_floor_s", "max_utterances"});
        read(s, "rho_initial_s", "session", cfg.session.rho_initial_s);
        read(s, "rho_floor_s", "session", cfg.session.rho_floor_s);
        read(s, "max_utterances", "session", cfg.session.max_utterances);
    }
    if (j.contains("injection")) {
        const json& s = j["injection"];
        reject_unknown(s, "injection",
                       {"wer_candidate_threshold", "injection_rate", "repeat_vs_rephrase_split", "error_response_pool"});
        read(s, "wer_candidate_threshold", "injection", cfg.injection.wer_candidate_threshold);
        read(s, "injection_rate", "injection", cfg.injection.injection_rate);
        read(s, "repeat_vs_rephrase_split", "injection", cfg.injection.repeat_vs_rephrase_split);
        if (s.contains("error_response_pool")) {
            const json& pool = s["error_response_pool"];
            if (!pool.is_array()) bad_config("injection.error_response_pool", "must be an array of strings");
            cfg.injection.error_response_pool.clear();
            for (const auto& e : pool) {
                if (!e.is_string()) bad_config("injection.error_response_pool", "must be an array of strings");
                cfg.injection.error_response_pool.push_back(e.get<std::string>());
            }
        }
    }
    if (j.contains("heads")) {
        const json& h = j["heads"];
        reject_unknown(h, "heads", {"hidden_dim", "out_dim", "dropout_rate"});
        read(h, "hidden_dim", "heads", cfg.heads.hidden_dim);
        read(h, "out_dim", "heads", cfg.heads.out_dim);
        read(h, "dropout_rate", "heads", cfg.heads.dropout_rate);
    }
    read(j, "similarity_threshold", "", cfg.similarity_threshold);
    read(j, "deletion_rate_threshold", "", cfg.deletion_rate_threshold);
    read(j, "seed", "", cfg.seed);
    read(j, "chunk_size", "", cfg.chunk_size);
    read(j, "mask_future", "", cfg.mask_future);
    read(j, "l_asr", "", cfg.l_asr);
    if (j.contains("mode")) {
        std::string m;
        read(j, "mode", "", m);
        auto p = parse_precision(m);
        if (!p) bad_config("mode", "must be \"verify\" or \"fast\"");
        cfg.mode = *p;
    }
    if (j.contains("rephrase_mapping")) {
        const json& m = j["rephrase_mapping"];
        if (!m.is_object()) bad_config("rephrase_mapping", "must be an object of strings");
        for (const auto& [key, value] : m.items()) {
            if (!value.is_string()) bad_config("rephrase_mapping", "must be an object of strings");
            cfg.rephrase_mapping.emplace(key, value.get<std::string>());
        }
    }
    auto path_of = [&](const char* key) {
        std::string s;
        read(j, key, "", s);
        std::filesystem::path p(s);
        return (s.empty() || p.is_absolute() || base_dir.empty()) ? p : base_dir / p;
    };
    cfg.in = path_of("in");
    cfg.out = path_of("out");
    cfg.injection.rng_seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, "config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

json run_config_to_json(const RunConfig& cfg) {
    json mapping = json::object();
    for (const auto& [k, v] : cfg.rephrase_mapping) mapping[k] = v;
    return {
        {"loss",
         {{"alpha", cfg.loss.alpha},
          {"beta", cfg.loss.beta},
          {"tau", cfg.loss.tau},
          {"gamma", cfg.loss.gamma},
          {"kappa", cfg.loss.kappa},
          {"lambda", cfg.loss.lambda},
          {"delta", cfg.loss.delta},
          {"smooth_negative", cfg.loss.smooth_negative}}},
        {"session",
         {{"rho_initial_s", cfg.session.rho_initial_s},
          {"rho_floor_s", cfg.session.rho_floor_s},
          {"max_utterances", cfg.session.max_utterances}}},
        {"injection",
         {{"wer_candidate_threshold", cfg.injection.wer_candidate_threshold},
          {"injection_rate", cfg.injection.injection_rate},
          {"repeat_vs_rephrase_split", cfg.injection.repeat_vs_rephrase_split},
          {"error_response_pool", cfg.injection.error_response_pool}}},
        {"heads",
         {{"hidden_dim", cfg.heads.hidden_dim},
          {"out_dim", cfg.heads.out_dim},
          {"dropout_rate", cfg.heads.dropout_rate}}},
        {"similarity_threshold", cfg.similarity_threshold},
        {"deletion_rate_threshold", cfg.deletion_rate_threshold},
        {"seed", cfg.seed},
        {"mode", std::string(to_string(cfg.mode))},
        {"chunk_size", cfg.chunk_size},
        {"mask_future", cfg.mask_future},
        {"l_asr", cfg.l_asr},
        {"rephrase_mapping", mapping},
    };
}

TurnWer turn_wer_table(const std::vector<Session>& sessions) {
    TurnWer out;
    for (const auto& s : sessions) {
        for (const auto& t : s.turns) {
            if (t.speaker != Speaker::user) continue;
            double w = 0.0;
            if (t.wer) {
                w = *t.wer;
            } else if (!t.hypotheses.empty()) {
                w = align(tokenize(t.transcript), tokenize(t.hypotheses.front().text)).wer();
            }
            out.emplace(t.event_id, w);
        }
    }
    return out;
}

json run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    auto events = read_events(cfg.in);
    if (events.empty()) throw Error(ErrorKind::EmptyCorpus, "no events in " + cfg.in.string());
    {
        std::set<std::string> ids;
        for (const auto& e : events) {
            if (!ids.insert(e.event_id).second) {
                throw Error(ErrorKind::ParseError, "duplicate event_id " + e.event_id);
            }
        }
    }

    EmbeddingStore store(cfg.in.parent_path());
    auto sessions = build_sessions(events, cfg.session);
    std::size_t truncated = 0;
    for (const auto& s : sessions) truncated += s.truncated ? 1 : 0;

    InjectionConfig inj = cfg.injection;
    inj.rng_seed = cfg.seed;
    const TurnWer wer = turn_wer_table(sessions);
    auto injected = inject_errors(std::move(sessions), wer, inj, TemplateRephraser(cfg.rephrase_mapping));
    sessions = std::move(injected.sessions);

    // Labels from the input, the injector and the detector, merged.
    std::map<std::pair<std::string, std::string>, std::pair<RephraseLabel, std::set<std::string>>> merged;
    auto add_label = [&](const RephraseLabel& l, const char* origin) {
        auto& slot = merged[{l.turn_id, l.source_turn_id}];
        if (slot.second.empty()) slot.first = l;
        slot.second.insert(origin);
    };
    for (const auto& s : sessions) {
        for (const auto& t : s.turns) {
            for (const auto& l : t.labels) {
                const bool from_injector = std::find(injected.labels.begin(), injected.labels.end(), l) !=
                                           injected.labels.end();
                if (!from_injector) add_label(l, "input");
            }
        }
    }
    for (const auto& l : injected.labels) add_label(l, "injected");
    std::size_t detected_count = 0;
    for (const auto& s : sessions) {
        std::vector<std::optional<Vector>> emb;
        for (const auto& t : s.turns) emb.push_back(t.speaker == Speaker::user ? detection_vector(t, store) : std::nullopt);
        for (const auto& l : detect_repeat_rephrase(s, emb, cfg.similarity_threshold)) {
            add_label(l, "detected");
            ++detected_count;
        }
    }
    std::set<std::string> r_set;
    json labels = json::array();
    for (const auto& [key, value] : merged) {
        r_set.insert(value.first.source_turn_id);
        std::string origin;
        for (const auto& o : value.second) origin += (origin.empty() ? "" : "+") + o;
        labels.push_back(label_json(value.first, origin));
    }

    // Batches. Every turn with frames is a sample; its past is the frames of
    // all earlier turns in the session stacked in order, its future those of
    // all later turns.
    std::vector<PfSample> pf_samples;
    std::vector<NBestSample> nb_samples;
    std::size_t pf_skipped = 0;
    std::size_t nb_skipped = 0;
    std::optional<std::size_t> k;
    for (const auto& s : sessions) {
        std::vector<const Matrix*> frames;
        for (const auto& t : s.turns) {
            const Matrix* f = t.embedding_ref ? &store.load(*t.embedding_ref) : nullptr;
            if (f) {
                if (!k) k = f->cols();
                if (f->cols() != *k) {
                    throw Error(ErrorKind::ShapeMismatch, "frame embedding " + *t.embedding_ref + " has " +
                                                              std::to_string(f->cols()) + " columns, expected " +
                                                              std::to_string(*k));
                }
            }
            frames.push_back(f);
        }
        for (std::size_t i = 0; i < s.turns.size(); ++i) {
            if (!frames[i]) continue;
            std::vector<Matrix> before, after;
            for (std::size_t j = 0; j < i; ++j) {
                if (frames[j]) before.push_back(*frames[j]);
            }
            for (std::size_t j = i + 1; j < s.turns.size(); ++j) {
                if (frames[j]) after.push_back(*frames[j]);
            }
            if (before.empty() || (!cfg.mask_future && after.empty())) {
                ++pf_skipped;
            } else {
                PfSample sample{s.turns[i].event_id, *frames[i], vstack<double>(before), std::nullopt};
                if (!cfg.mask_future) sample.future = vstack<double>(after);
                pf_samples.push_back(std::move(sample));
            }

            const Turn& t = s.turns[i];
            if (t.speaker != Speaker::user || !t.hyp_embedding_ref) continue;
            const Matrix& hyps = store.load(*t.hyp_embedding_ref);
            const bool rephrase = r_set.count(t.event_id) > 0;
            if (hyps.rows() == 0 || (rephrase && hyps.rows() < 2)) {
                ++nb_skipped;
                continue;
            }
            nb_samples.push_back({t.event_id, *frames[i], hyps, rephrase});
        }
    }

    LossOutcome losses;
    if (k) {
        losses = cfg.mode == Precision::verify ? evaluate_losses<double>(pf_samples, nb_samples, *k, cfg)
                                               : evaluate_losses<float>(pf_samples, nb_samples, *k, cfg);
    } else {
        losses.pf = {{"evaluated", false}, {"samples", 0}, {"loss", 0.0}};
        losses.nbest = {{"evaluated", false}, {"samples", 0}, {"loss", 0.0}};
    }
    losses.pf["skipped"] = pf_skipped;
    losses.nbest["skipped"] = nb_skipped;
    const double overall = overall_loss(cfg.l_asr, losses.l_pf, losses.l_nbest, cfg.loss);

    // Corpus metrics over user turns that carry hypotheses.
    std::vector<std::pair<Words, Words>> pairs;
    std::vector<AlignmentResult> oracle;
    std::vector<std::pair<Words, Words>> slice;
    std::vector<std::string> pair_ids;
    for (const auto& s : sessions) {
        for (const auto& t : s.turns) {
            if (t.speaker != Speaker::user || t.hypotheses.empty()) continue;
            Words ref = tokenize(t.transcript);
            std::vector<Words> nbest;
            for (const auto& h : t.hypotheses) nbest.push_back(tokenize(h.text));
            oracle.push_back(oracle_alignment(ref, nbest).alignment);
            if (r_set.count(t.event_id)) slice.emplace_back(ref, nbest.front());
            pairs.emplace_back(std::move(ref), nbest.front());
            pair_ids.push_back(t.event_id);
        }
    }
    json metrics = nullptr;
    if (!pairs.empty()) {
        metrics = score_json(corpus_score(pairs));
        metrics["oracle_wer"] = corpus_score(oracle).wer;
        metrics["repeat_rephrase"] = slice.empty() ? json(nullptr) : score_json(corpus_score(slice));
        const auto filt = filter_high_deletion(pairs, cfg.deletion_rate_threshold);
        json dropped = json::array();
        for (std::size_t i : filt.dropped) dropped.push_back(pair_ids[i]);
        metrics["deletion_filter"] = {{"threshold", cfg.deletion_rate_threshold},
                                      {"kept", filt.kept.size()},
                                      {"dropped", dropped}};
    }

    std::size_t turn_count = 0;
    for (const auto& s : sessions) turn_count += s.turns.size();
    json modified = json::array();
    for (std::size_t m : injected.modified) modified.push_back(sessions[m].session_id);

    json report = {
        {"schema", kReportSchema},
        {"config", run_config_to_json(cfg)},
        {"counts",
         {{"events", events.size()},
          {"sessions", sessions.size()},
          {"truncated_sessions", truncated},
          {"turns_after_injection", turn_count},
          {"injected_sessions", modified},
          {"injected_labels", injected.labels.size()},
          {"detected_labels", detected_count},
          {"r_set_size", r_set.size()}}},
        {"r_set", r_set},
        {"labels", labels},
        {"losses",
         {{"l_asr", cfg.l_asr}, {"pf", losses.pf}, {"nbest", losses.nbest}, {"overall", overall}}},
        {"metrics", metrics},
    };
    if (!cfg.out.empty()) write_file_atomically(cfg.out, report.dump(2) + "\n");
    return report;
}

namespace {

void need(std::vector<std::string>& out, const json& j, const std::string& path, const char* key,
          json::value_t type) {
    if (!j.is_object() || !j.contains(key)) {
        out.push_back(path + "." + key + ": missing");
        return;
    }
    const json& v = j[key];
    const bool ok = type == json::value_t::number_float ? v.is_number()
                    : type == json::value_t::number_unsigned ? v.is_number_unsigned()
                                                             : v.type() == type;
    if (!ok) out.push_back(path + "." + key + ": wrong type");
    if (v.is_number_float() && !std::isfinite(v.get<double>())) out.push_back(path + "." + key + ": not finite");
}

void check_loss_section(std::vector<std::string>& out, const json& j, const std::string& path) {
    using vt = json::value_t;
    need(out, j, path, "evaluated", vt::boolean);
    need(out, j, path, "samples", vt::number_unsigned);
    need(out, j, path, "skipped", vt::number_unsigned);
    need(out, j, path, "loss", vt::number_float);
    if (j.is_object() && j.value("evaluated", false)) {
        need(out, j, path, "grad_norms", vt::object);
        if (j.contains("loss") && j["loss"].is_number() && j["loss"].get<double>() < 0) {
            out.push_back(path + ".loss: negative");
        }
    }
}

} // namespace

std::vector<std::string> validate_report(const json& r) {
    using vt = json::value_t;
    std::vector<std::string> out;
    if (!r.is_object()) return {"report is not an object"};
    need(out, r, "$", "schema", vt::string);
    if (r.contains("schema") && r["schema"] != kReportSchema) out.push_back("$.schema: unexpected value");
    need(out, r, "$", "config", vt::object);
    need(out, r, "$", "counts", vt::object);
    need(out, r, "$", "r_set", vt::array);
    need(out, r, "$", "labels", vt::array);
    need(out, r, "$", "losses", vt::object);
    if (!r.contains("metrics")) out.push_back("$.metrics: missing");
    if (!out.empty()) return out;

    for (const char* key : {"events", "sessions", "truncated_sessions", "turns_after_injection", "injected_labels",
                            "detected_labels", "r_set_size"}) {
        need(out, r["counts"], "$.counts", key, vt::number_unsigned);
    }
    need(out, r["counts"], "$.counts", "injected_sessions", vt::array);
    if (r["counts"].contains("r_set_size") && r["counts"]["r_set_size"] != r["r_set"].size()) {
        out.push_back("$.counts.r_set_size: disagrees with $.r_set");
    }
    for (std::size_t i = 0; i < r["labels"].size(); ++i) {
        const std::string p = "$.labels[" + std::to_string(i) + "]";
        for (const char* key : {"kind", "turn_id", "source_turn_id", "origin"}) need(out, r["labels"][i], p, key, vt::string);
    }
    const json& l = r["losses"];
    need(out, l, "$.losses", "l_asr", vt::number_float);
    need(out, l, "$.losses", "overall", vt::number_float);
    need(out, l, "$.losses", "pf", vt::object);
    need(out, l, "$.losses", "nbest", vt::object);
    if (l.contains("pf")) check_loss_section(out, l["pf"], "$.losses.pf");
    if (l.contains("nbest")) check_loss_section(out, l["nbest"], "$.losses.nbest");
    const json& m = r["metrics"];
    if (!m.is_null()) {
        for (const char* key : {"wer", "ser", "oracle_wer"}) need(out, m, "$.metrics", key, vt::number_float);
        for (const char* key : {"n_utterances", "n_ref_words"}) need(out, m, "$.metrics", key, vt::number_unsigned);
        if (m.contains("ser") && m["ser"].is_number()) {
            const double ser = m["ser"].get<double>();
            if (ser < 0 || ser > 1) out.push_back("$.metrics.ser: outside [0, 1]");
        }
        if (m.contains("oracle_wer") && m.contains("wer") && m["oracle_wer"].is_number() && m["wer"].is_number() &&
            m["oracle_wer"].get<double>() > m["wer"].get<double>() + 1e-12) {
            out.push_back("$.metrics.oracle_wer: exceeds top-1 wer");
        }
    }
    return out;
}

} // namespace clc
