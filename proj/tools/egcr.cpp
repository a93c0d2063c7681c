// egcr: command-line front end (ingest, fit, eval, serve, explain, synth).

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "egcr/engine.hpp"
#include "egcr/error.hpp"
#include "egcr/experiment.hpp"
#include "egcr/redial.hpp"
#include "egcr/service.hpp"
#include "egcr/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IngestArgs {
  egcr::IngestOptions options;
  std::string concept_triples, concept_entities, alignment, reviews;
  std::string activation = "relu";
};

struct FitArgs {
  std::string dialogs, out, model;
  egcr::FitConfig cfg;
  bool freeze_beta = false;
};

struct EvalArgs {
  egcr::ExperimentConfig cfg;
  std::string ks = "1,10,50";
  std::string report;
  bool use_llm = false;
};

struct ServeArgs {
  std::string model = "model";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "sessions";
};

struct ExplainArgs {
  std::string dialog, model = "model", conversation_id;
  int turn = 0;
  bool use_llm = false;
  bool show_prompt = false;
  bool as_json = false;
};

void run_ingest(IngestArgs& a) {
  auto& o = a.options;
  if (!a.concept_triples.empty()) o.concept_triples = a.concept_triples;
  if (!a.concept_entities.empty()) o.concept_entities = a.concept_entities;
  if (!a.alignment.empty()) o.alignment = a.alignment;
  if (!a.reviews.empty()) o.reviews = a.reviews;
  o.config.encoder.activation = a.activation == "identity" ? egcr::Activation::identity : egcr::Activation::relu;
  o.config.encoder.validate();
  const auto s = egcr::ingest(o);
  std::cout << "wrote " << o.out.string() << ": " << s.entities << " entities (" << s.items << " items), "
            << s.relations << " relations, " << s.triples << " triples, reviews for " << s.reviewed_items
            << " items\n";
}

void run_fit(const FitArgs& a) {
  auto cfg = a.cfg;
  cfg.train_beta = !a.freeze_beta;
  const fs::path model = a.model.empty() ? fs::path(a.out) : fs::path(a.model);
  const auto s = egcr::fit_model(model, a.dialogs, a.out, cfg);
  const auto& h = s.result.loss_history;
  std::cout << "fit on " << s.result.used_examples << " labeled turns from " << s.dialogs << " dialogs";
  if (s.skipped_lines > 0) std::cout << " (" << s.skipped_lines << " malformed lines skipped)";
  std::cout << "\nloss " << h.front() << " -> " << *std::min_element(h.begin(), h.end()) << ", beta "
            << s.result.params.beta << "\nwrote " << a.out << '\n';
}

void run_eval(EvalArgs& a) {
  a.cfg.ks = egcr::parse_ks(a.ks);
  if (!a.report.empty()) a.cfg.report = a.report;
  if (a.use_llm) a.cfg.client = egcr::completion_client_from_env();
  const auto report = egcr::run_experiment(a.cfg);
  std::cout << egcr::render_report_table(report);
  if (a.cfg.report) std::cout << "wrote " << a.cfg.report->string() << '\n';
}

int run_serve(const ServeArgs& a) {
  // Block termination signals in every thread; one thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::shared_ptr<const egcr::Engine> engine;
  try {
    engine = std::make_shared<const egcr::Engine>(egcr::Engine::load(a.model, egcr::completion_client_from_env()));
    std::cerr << "loaded model " << a.model << " (explanations via " << engine->client().name() << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "egcr: warning: model not loaded, turns will answer 503: " << e.what() << '\n';
  }
  egcr::ConversationService service(engine, egcr::SessionStore(a.data_dir));
  egcr::HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  std::cerr << "listening on http://" << a.host << ':' << port << " (" << service.session_count()
            << " sessions restored from " << a.data_dir << ")\n";

  std::thread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  // serve() also returns on its own; wake the waiter if it is still blocked.
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return 0;
}

void run_explain(const ExplainArgs& a) {
  const auto engine = egcr::Engine::load(a.model, a.use_llm ? egcr::completion_client_from_env() : nullptr);
  const auto load = egcr::load_redial(fs::path(a.dialog), &engine.graph());
  for (const auto& w : load.warnings) std::cerr << "egcr: warning: " << w << '\n';
  const egcr::Dialog* dialog = nullptr;
  for (const auto& d : load.dialogs) {
    if (a.conversation_id.empty() || d.conversation_id == a.conversation_id) {
      dialog = &d;
      break;
    }
  }
  if (dialog == nullptr) {
    throw egcr::NotFoundError(a.conversation_id.empty() ? "no dialogs in " + a.dialog
                                                        : "no dialog '" + a.conversation_id + "' in " + a.dialog);
  }
  if (a.turn < 1 || static_cast<std::size_t>(a.turn) > dialog->turns.size() + 1) {
    throw egcr::ConfigError("turn must be in 1.." + std::to_string(dialog->turns.size() + 1));
  }
  const auto action = engine.act(dialog->history_before(a.turn));
  const auto& g = engine.graph();
  if (a.as_json) {
    json recs = json::array();
    for (const auto& r : action.recommendation.ranked) {
      recs.push_back({{"entity_id", r.entity}, {"name", g.entity(r.entity).name}, {"score", r.score}});
    }
    json out{{"conversation_id", dialog->conversation_id},
             {"turn", a.turn},
             {"recommendations", recs},
             {"path", egcr::render_path_hops(action.path, g)},
             {"response_text", action.response_text},
             {"explanation", {{"text", action.explanation.text}, {"source", to_string(action.explanation.source)}}}};
    if (a.show_prompt) out["prompt"] = action.prompt;
    std::cout << out.dump(2) << '\n';
    return;
  }
  std::cout << "dialog " << dialog->conversation_id << ", agent turn " << a.turn << '\n';
  for (std::size_t i = 0; i < action.recommendation.ranked.size(); ++i) {
    const auto& r = action.recommendation.ranked[i];
    std::cout << "  " << i + 1 << ". " << g.entity(r.entity).name << " [" << r.entity << "] " << r.score << '\n';
  }
  std::cout << "path: " << egcr::render_path(action.path, g) << '\n';
  if (a.show_prompt) std::cout << "--- prompt ---\n" << action.prompt << "\n--------------\n";
  std::cout << "AGENT: " << action.response_text << " (" << action.explanation.text << ")\n"
            << "source: " << to_string(action.explanation.source) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable conversational recommender over knowledge graphs"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Load and fuse graphs and reviews into a model directory");
  {
    auto& o = ingest_args.options;
    ingest->add_option("--triples", o.triples, "Triples TSV (head, relation, tail)")->required()->check(CLI::ExistingFile);
    ingest->add_option("--entities", o.entities, "Entities JSONL")->required()->check(CLI::ExistingFile);
    ingest->add_option("--concept-triples", ingest_args.concept_triples, "Second graph triples")->check(CLI::ExistingFile);
    ingest->add_option("--concept-entities", ingest_args.concept_entities, "Second graph entities")->check(CLI::ExistingFile);
    ingest->add_option("--alignment", ingest_args.alignment, "Alignment TSV (item id, concept id)")->check(CLI::ExistingFile);
    ingest->add_option("--reviews", ingest_args.reviews, "Reviews JSONL")->check(CLI::ExistingFile);
    o.out = "model";
    ingest->add_option("--out", o.out, "Model directory")->capture_default_str();
    ingest->add_option("--dim", o.config.encoder.dim, "Embedding width")->capture_default_str();
    ingest->add_option("--layers", o.config.encoder.layers, "R-GCN layers")->capture_default_str();
    ingest->add_option("--activation", ingest_args.activation, "Hidden activation")
        ->check(CLI::IsMember({"relu", "identity"}))->capture_default_str();
    ingest->add_option("--seed", o.config.encoder.seed, "Encoder seed")->capture_default_str();
    ingest->add_option("--conversation-seed", o.config.conversation_seed, "Conversation encoder seed")->capture_default_str();
    ingest->add_option("--text-width", o.config.text_encoder.width, "Hashing encoder width")->capture_default_str();
    ingest->add_option("--alpha", o.config.review_alpha, "Weight of the graph embedding when fusing reviews")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    ingest->add_option("--reviews-per-item", o.config.reviews_per_item, "Most helpful reviews kept")->capture_default_str();
    ingest->add_option("--top-k", o.config.top_k, "Recommendations per turn")->check(CLI::PositiveNumber)->capture_default_str();
    ingest->add_flag("--no-inverse{false}", o.add_inverse, "Do not add reversed copies of the triples");
    ingest->add_option("--path-length", o.config.path_length, "Maximum reasoning path hops")->check(CLI::PositiveNumber)->capture_default_str();
  }

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit scorer parameters on labeled dialogs");
  fit->add_option("--dialogs", fit_args.dialogs, "Dialogs JSONL")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_args.out, "Output model directory")->required();
  fit->add_option("--model", fit_args.model, "Input model directory (default: --out)");
  fit->add_option("--seed", fit_args.cfg.seed, "Seed")->capture_default_str();
  fit->add_option("--epochs", fit_args.cfg.epochs, "Epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  fit->add_option("--lr", fit_args.cfg.lr, "Initial step size")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_flag("--joint-encoder", fit_args.cfg.joint_encoder, "Also train the last encoder layer");
  fit->add_flag("--freeze-beta", fit_args.freeze_beta, "Keep the mention weight fixed");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on labeled dialogs");
  eval->add_option("--dialogs", eval_args.cfg.dialogs, "Dialogs JSONL")->required();
  eval->add_option("--model", eval_args.cfg.model_dir, "Model directory")->required();
  eval->add_option("--k", eval_args.ks, "Recall cut-offs")->capture_default_str();
  eval->add_option("--report", eval_args.report, "JSON report path (table written next to it as .txt)");
  eval->add_flag("--use-llm", eval_args.use_llm, "Explain via the completion service from the environment");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Serve the session API over HTTP");
  serve->add_option("--port", serve_args.port, "Port (0 = any free port)")->capture_default_str();
  serve->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
  serve->add_option("--model", serve_args.model, "Model directory")->capture_default_str();
  serve->add_option("--data-dir", serve_args.data_dir, "Session log directory")->capture_default_str();

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Explain the agent's action at one turn of a dialog");
  explain->add_option("--dialog", explain_args.dialog, "Dialogs JSONL")->required()->check(CLI::ExistingFile);
  explain->add_option("--turn", explain_args.turn, "1-based turn the agent takes")->required();
  explain->add_option("--model", explain_args.model, "Model directory")->capture_default_str();
  explain->add_option("--conversation-id", explain_args.conversation_id, "Dialog to use (default: first)");
  explain->add_flag("--use-llm", explain_args.use_llm, "Explain via the completion service from the environment");
  explain->add_flag("--show-prompt", explain_args.show_prompt, "Print the rendered prompt");
  explain->add_flag("--json", explain_args.as_json, "JSON output");

  egcr::PlantedSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a planted-structure corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--items", synth_spec.items, "Items")->capture_default_str();
  synth->add_option("--attributes", synth_spec.attributes, "Planted attributes (one item pair each)")->capture_default_str();
  synth->add_option("--dialogs", synth_spec.dialogs, "Dialogs")->capture_default_str();
  synth->add_option("--train-fraction", synth_spec.train_fraction, "Training split")->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) run_ingest(ingest_args);
    if (*fit) run_fit(fit_args);
    if (*eval) run_eval(eval_args);
    if (*serve) return run_serve(serve_args);
    if (*explain) run_explain(explain_args);
    if (*synth) {
      const auto corpus = egcr::make_planted_corpus(synth_spec);
      egcr::write_planted_corpus(corpus, synth_out);
      std::cout << "wrote " << synth_out << ": " << corpus.train.size() << " training and " << corpus.test.size()
                << " test dialogs\n";
    }
  } catch (const egcr::ConfigError& e) {
    std::cerr << "egcr: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "egcr: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
