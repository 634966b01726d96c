#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgv/contextstore.hpp"
#include "kgv/corrector.hpp"
#include "kgv/error.hpp"
#include "kgv/judge.hpp"
#include "kgv/matching.hpp"
#include "kgv/textmetrics.hpp"
#include "kgv/triplets.hpp"

namespace kgv::cli {

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct Global {
  std::uint64_t seed = 0;
  double threshold = 0.80;
  bool strict = false;
  bool quiet = false;
  std::string abbreviations;
  std::string embedder = "hashing";
  std::string embed_url;
  std::string embed_model;
  std::size_t dimension = kDefaultDimension;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& data, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << data;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << data;
  if (!f) throw UsageError("write failed: " + path);
}

SplitterConfig splitter_for(const Global& g) {
  return g.abbreviations.empty() ? SplitterConfig::defaults() : SplitterConfig::load(g.abbreviations);
}

std::unique_ptr<Embedder> embedder_for(const Global& g) {
  if (g.embedder == "external") {
    EndpointConfig cfg;
    cfg.base_url = g.embed_url;
    cfg.model = g.embed_model;
    if (cfg.base_url.empty()) throw UsageError("--embed-url is required with --embedder external");
    return std::make_unique<ExternalEmbedder>(cfg, g.dimension, make_http_transport(cfg));
  }
  return std::make_unique<HashingEmbedder>(g.dimension);
}

MatcherConfig matcher_config(const Global& g, const std::string& aliases) {
  MatcherConfig mc;
  mc.threshold = g.threshold;
  mc.dimension = g.dimension;
  mc.embedder = g.embedder == "external" ? EmbedderKind::external : EmbedderKind::hashing;
  if (!aliases.empty()) mc.alias_table = load_alias_table(std::filesystem::path(aliases));
  mc.validate();
  return mc;
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph verification of generated text", "kgv"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key-value file mirroring the flags");
  Global g;
  app.add_option("--seed", g.seed, "Seed for randomized steps");
  app.add_option("--threshold", g.threshold, "Embedding match threshold in (0, 1]");
  app.add_flag("--strict", g.strict, "Eliminate sentences without extractable triplets");
  app.add_flag("--quiet", g.quiet, "Suppress non-data output");
  app.add_option("--abbreviations", g.abbreviations, "Abbreviation list for sentence splitting");
  app.add_option("--embedder", g.embedder, "Entity embedder")
      ->check(CLI::IsMember({"hashing", "external"}));
  app.add_option("--embed-url", g.embed_url, "Base URL of an /embeddings endpoint");
  app.add_option("--embed-model", g.embed_model, "Embedding model name");
  app.add_option("--dimension", g.dimension, "Embedding dimension")->check(CLI::PositiveNumber);

  // extract
  auto* extract = app.add_subcommand("extract", "Extract triplet records from a document");
  std::string ex_in, ex_out;
  extract->add_option("--in", ex_in, "Input document")->required();
  extract->add_option("--out", ex_out, "Output triplet records (default stdout)");

  // correct
  auto* correct_cmd = app.add_subcommand("correct", "Verify and correct generated text");
  std::string co_generated, co_report, co_store, co_aliases;
  std::vector<std::string> co_context;
  bool co_check = false, co_pretty = false;
  correct_cmd->add_option("--generated", co_generated, "Generated document")->required();
  correct_cmd->add_option("--context", co_context, "Context document(s)");
  correct_cmd->add_option("--store", co_store, "Triplet store");
  correct_cmd->add_option("--report", co_report, "Write the correction report here");
  correct_cmd->add_option("--aliases", co_aliases, "Alias table");
  correct_cmd->add_flag("--check", co_check, "Exit 1 when corrections were made");
  correct_cmd->add_flag("--pretty", co_pretty, "Indent the report");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a dataset");
  std::string ev_dataset, ev_out, ev_judge = "none", ev_fixture, ev_url, ev_model,
                                  ev_key_env = "TRUSTFUL_JUDGE_API_KEY", ev_aliases;
  std::size_t ev_workers = 4;
  int ev_retries = 2;
  double ev_timeout = 60.0;
  bool ev_hc = false;
  eval->add_option("--dataset", ev_dataset, "Line-delimited records")->required();
  eval->add_option("--out", ev_out, "Results file (default stdout)");
  eval->add_option("--judge", ev_judge, "Judge backend")->check(CLI::IsMember({"none", "mock", "live"}));
  eval->add_option("--mock-fixture", ev_fixture, "Canned replies for --judge mock");
  eval->add_option("--judge-url", ev_url, "Chat-completion base URL for --judge live");
  eval->add_option("--judge-model", ev_model, "Judge model name");
  eval->add_option("--api-key-env", ev_key_env, "Environment variable holding the judge API key");
  eval->add_option("--judge-retries", ev_retries, "Retries per judge call")->check(CLI::NonNegativeNumber);
  eval->add_option("--judge-timeout", ev_timeout, "Judge request timeout in seconds");
  eval->add_option("--workers", ev_workers, "Concurrent records")->check(CLI::PositiveNumber);
  eval->add_flag("--hc", ev_hc, "Correct each candidate against its context and report eliminated_entity_rate");
  eval->add_option("--aliases", ev_aliases, "Alias table for --hc");

  // index
  auto* index = app.add_subcommand("index", "Build or query a triplet store");
  index->require_subcommand(1);
  index->fallthrough();
  auto* build = index->add_subcommand("build", "Build a store from context documents or records");
  std::string ib_store;
  std::vector<std::string> ib_context, ib_triplets;
  build->add_option("--store", ib_store, "Output store")->required();
  build->add_option("--context", ib_context, "Context document(s)");
  build->add_option("--triplets", ib_triplets, "Triplet record file(s)");
  auto* query = index->add_subcommand("query", "Top-k store entities for a string");
  std::string iq_store, iq_text, iq_aliases;
  std::size_t iq_k = 5;
  query->add_option("--store", iq_store, "Store file")->required();
  query->add_option("--text", iq_text, "Query string")->required();
  query->add_option("-k,--top-k", iq_k, "Number of results")->check(CLI::PositiveNumber);
  query->add_option("--aliases", iq_aliases, "Alias table");

  // bundle
  auto* bundle_cmd = app.add_subcommand("bundle", "Export a guided-context bundle");
  std::string bu_id, bu_prompt, bu_store, bu_out;
  std::vector<std::string> bu_rag, bu_pool;
  std::size_t bu_count = 1;
  bundle_cmd->add_option("--id", bu_id, "Bundle id");
  bundle_cmd->add_option("--prompt", bu_prompt, "Prompt text");
  bundle_cmd->add_option("--rag", bu_rag, "RAG result document(s), in order");
  bundle_cmd->add_option("--store", bu_store, "Triplet store");
  bundle_cmd->add_option("--pool", bu_pool, "Distractor documents from other prompts");
  bundle_cmd->add_option("--count", bu_count, "Distractors to append");
  bundle_cmd->add_option("--out", bu_out, "Output file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "kgv: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    if (!g.quiet) err << sub->help();
    return kExitUsage;
  }

  auto note = [&](const std::string& msg) {
    if (!g.quiet) err << msg << "\n";
  };

  try {
    const SplitterConfig splitter = splitter_for(g);
    const ExtractionRules rules = ExtractionRules::defaults();

    if (*extract) {
      std::string text = read_file(ex_in);
      auto triplets = extract_document(text, splitter, rules);
      emit(ex_out, serialize_triplets(triplets), out);
      note("extracted " + std::to_string(triplets.size()) + " triplets");
      return kExitOk;
    }

    if (*correct_cmd) {
      if (co_context.empty() && co_store.empty())
        throw UsageError("correct needs a grounding source: --context or --store");
      std::string generated = read_file(co_generated);
      std::vector<std::string> rag;
      for (const auto& p : co_context) rag.push_back(read_file(p));
      std::optional<TripletStore> store;
      if (!co_store.empty()) store = load_store(std::filesystem::path(co_store));
      auto embedder = embedder_for(g);
      AssembleOptions ao;
      ao.splitter = splitter;
      ao.rules = rules;
      ContextBundle bundle = assemble("", rag, store ? &*store : nullptr, *embedder, ao);
      EntityMatcher matcher(bundle.graph, *bundle.index, *embedder, matcher_config(g, co_aliases));
      CorrectorConfig cc;
      cc.strict = g.strict;
      cc.splitter = splitter;
      cc.rules = rules;
      CorrectionReport report = correct(generated, bundle.graph, matcher, cc);
      out << report.corrected;
      if (!co_report.empty()) emit(co_report, report_to_json(report, co_pretty) + "\n", out);
      note(std::to_string(report.actions.size()) + " actions, eliminated_entity_rate " +
           fixed(report.eliminated_entity_rate));
      return co_check && report.changed() ? kExitCheckFailed : kExitOk;
    }

    if (*eval) {
      std::ifstream in(ev_dataset);
      if (!in) throw UsageError("cannot read " + ev_dataset);
      std::vector<EvalRecord> records = load_dataset(in);

      std::unique_ptr<JudgeClient> client;
      if (ev_judge == "mock") {
        if (ev_fixture.empty()) throw UsageError("--judge mock needs --mock-fixture");
        client = std::make_unique<MockJudgeClient>(MockJudgeClient::load(std::filesystem::path(ev_fixture)));
      } else if (ev_judge == "live") {
        EndpointConfig ec;
        ec.base_url = ev_url;
        ec.model = ev_model;
        ec.api_key_env = ev_key_env;
        ec.max_retries = ev_retries;
        ec.timeout_seconds = ev_timeout;
        read_api_key(ec);
        if (ec.base_url.empty()) throw UsageError("--judge live needs --judge-url");
        client = std::make_unique<LiveJudgeClient>(ec, nullptr, ev_workers);
      }

      EvalOptions opts;
      opts.workers = ev_workers;
      if (client) {
        opts.groundedness = [&](const EvalRecord& r) { return judge_groundedness(r, *client).score; };
        opts.gpt_similarity = [&](const EvalRecord& r) { return judge_similarity(r, *client).score; };
      }
      std::unique_ptr<Embedder> embedder;
      std::optional<MatcherConfig> mc;
      if (ev_hc) {
        embedder = embedder_for(g);
        mc = matcher_config(g, ev_aliases);
        opts.eliminated_entity_rate = [&](const EvalRecord& r) {
          KnowledgeGraph graph = build_graph(extract_document(r.context, splitter, rules));
          VectorIndex idx = build_index(graph, *embedder);
          EntityMatcher matcher(graph, idx, *embedder, *mc);
          CorrectorConfig cc;
          cc.strict = g.strict;
          cc.splitter = splitter;
          cc.rules = rules;
          return correct(r.candidate, graph, matcher, cc).eliminated_entity_rate;
        };
      }
      EvalResult result = evaluate_dataset(records, opts);
      std::ostringstream buf;
      write_results(buf, result);
      emit(ev_out, buf.str(), out);
      note("scored " + std::to_string(result.records.size()) + " records");
      return kExitOk;
    }

    if (*build) {
      if (ib_context.empty() && ib_triplets.empty())
        throw UsageError("index build needs --context or --triplets");
      std::vector<Triplet> all;
      for (const auto& p : ib_context) {
        auto ts = extract_document(read_file(p), splitter, rules);
        all.insert(all.end(), ts.begin(), ts.end());
      }
      for (const auto& p : ib_triplets) {
        auto ts = ingest_triplets(read_file(p)).triplets;
        all.insert(all.end(), ts.begin(), ts.end());
      }
      auto embedder = embedder_for(g);
      TripletStore store = make_store(all, *embedder);
      save_store(store, std::filesystem::path(ib_store));
      note("stored " + std::to_string(store.triplets.size()) + " triplets, " +
           std::to_string(store.index.size()) + " entities");
      return kExitOk;
    }

    if (*query) {
      TripletStore store = load_store(std::filesystem::path(iq_store));
      auto embedder = embedder_for(g);
      if (embedder->dimension() != store.index.dimension())
        throw UsageError("store dimension " + std::to_string(store.index.dimension()) +
                         " differs from --dimension " + std::to_string(embedder->dimension()));
      MatcherConfig mc = matcher_config(g, iq_aliases);
      std::string key = normalize_entity(iq_text);
      if (key.empty()) throw UsageError("empty query");
      if (auto it = mc.alias_table.find(key); it != mc.alias_table.end() && store.index.contains(it->second))
        key = it->second;
      const EmbeddingVector* stored = store.index.find(key);
      EmbeddingVector v = stored ? *stored : embedder->embed(key);
      for (const auto& [k, score] : store.index.query(v, iq_k)) out << k << '\t' << fixed(score) << '\n';
      return kExitOk;
    }

    if (*bundle_cmd) {
      std::vector<std::string> rag, pool;
      auto chomp = [](std::string s) {
        while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
        return s;
      };
      for (const auto& p : bu_rag) rag.push_back(chomp(read_file(p)));
      for (const auto& p : bu_pool) pool.push_back(chomp(read_file(p)));
      std::optional<TripletStore> store;
      if (!bu_store.empty()) store = load_store(std::filesystem::path(bu_store));
      auto embedder = embedder_for(g);
      AssembleOptions ao;
      ao.id = bu_id;
      ao.splitter = splitter;
      ao.rules = rules;
      ContextBundle b = assemble(bu_prompt, rag, store ? &*store : nullptr, *embedder, ao);
      if (bu_count > 0 && !pool.empty()) b = augment(b, pool, bu_count, g.seed, *embedder, ao);
      emit(bu_out, export_bundle(b) + "\n", out);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "kgv: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "kgv: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace kgv::cli
