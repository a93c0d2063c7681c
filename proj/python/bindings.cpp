#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "egcr/engine.hpp"
#include "egcr/error.hpp"
#include "egcr/experiment.hpp"
#include "egcr/explainer.hpp"
#include "egcr/metrics.hpp"
#include "egcr/redial.hpp"
#include "egcr/service.hpp"
#include "egcr/synthetic.hpp"

namespace py = pybind11;
using namespace egcr;

namespace {

py::object to_python(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float: return py::float_(j.get<double>());
    case nlohmann::json::value_t::string: return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_python(v));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_python(v);
      return out;
    }
    default: return py::none();
  }
}

Speaker speaker_of(const std::string& s) {
  if (s == "seeker" || s == "user") return Speaker::seeker;
  if (s == "recommender" || s == "agent") return Speaker::recommender;
  throw ValidationError("unknown speaker '" + s + "'");
}

// Seeker turns get lexicon mentions, agent turns `@<id>` placeholders.
DialogHistory history_of(const Engine& engine, const std::vector<std::pair<std::string, std::string>>& turns) {
  DialogHistory h;
  for (const auto& [who, text] : turns) {
    const auto sp = speaker_of(who);
    h.append(sp, text, sp == Speaker::seeker ? link_mentions(text, engine.graph()).mentions : link_placeholders(text));
  }
  return h;
}

py::list ranked_list(const Engine& engine, const Recommendation& rec) {
  py::list out;
  for (const auto& r : rec.ranked) {
    out.append(py::make_tuple(r.entity, engine.graph().entity(r.entity).name, r.score));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Explainable conversational recommender core.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());
  py::register_exception<ModelNotLoadedError>(m, "ModelNotLoadedError", base.ptr());

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });
  m.def("distinct_n", &distinct_n, py::arg("utterances"), py::arg("n"));
  m.def("bleu", &bleu, py::arg("candidates"), py::arg("references"));
  m.def("corpus_recall", &corpus_recall, py::arg("hits"));

  m.def(
      "synth",
      [](const std::filesystem::path& dir, std::size_t items, std::size_t attributes, std::size_t dialogs,
         std::uint64_t seed) {
        PlantedSpec spec;
        spec.items = items;
        spec.attributes = attributes;
        spec.dialogs = dialogs;
        spec.seed = seed;
        spec.validate();
        write_planted_corpus(make_planted_corpus(spec), dir);
      },
      py::arg("dir"), py::arg("items") = 50, py::arg("attributes") = 10, py::arg("dialogs") = 200,
      py::arg("seed") = 7, "Writes a planted corpus (triples, entities, reviews, train/test dialogs).");

  m.def(
      "ingest",
      [](const std::filesystem::path& triples, const std::filesystem::path& entities, const std::filesystem::path& out,
         std::optional<std::filesystem::path> reviews, std::uint64_t seed) {
        IngestOptions opt;
        opt.triples = triples;
        opt.entities = entities;
        opt.out = out;
        opt.reviews = std::move(reviews);
        opt.config.encoder.seed = seed;
        const auto s = ingest(opt);
        py::dict d;
        d["entities"] = s.entities;
        d["relations"] = s.relations;
        d["triples"] = s.triples;
        d["items"] = s.items;
        d["reviewed_items"] = s.reviewed_items;
        return d;
      },
      py::arg("triples"), py::arg("entities"), py::arg("out"), py::arg("reviews") = py::none(), py::arg("seed") = 0);

  m.def(
      "fit",
      [](const std::filesystem::path& model, const std::filesystem::path& dialogs, const std::filesystem::path& out,
         int epochs, std::uint64_t seed, bool joint) {
        FitConfig cfg;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.joint_encoder = joint;
        const auto s = fit_model(model, dialogs, out, cfg);
        py::dict d;
        d["dialogs"] = s.dialogs;
        d["skipped_lines"] = s.skipped_lines;
        d["used_examples"] = s.result.used_examples;
        d["loss"] = s.result.loss_history.empty() ? 0.0 : s.result.loss_history.back();
        return d;
      },
      py::arg("model"), py::arg("dialogs"), py::arg("out"), py::arg("epochs") = 100, py::arg("seed") = 0,
      py::arg("joint") = false);

  m.def(
      "evaluate",
      [](const std::filesystem::path& model, const std::filesystem::path& dialogs, std::vector<std::size_t> ks) {
        ExperimentConfig cfg;
        cfg.model_dir = model;
        cfg.dialogs = dialogs;
        cfg.ks = std::move(ks);
        return to_python(to_json(run_experiment(cfg)));
      },
      py::arg("model"), py::arg("dialogs"), py::arg("ks") = std::vector<std::size_t>{1, 10, 50});

  py::class_<Engine, std::shared_ptr<Engine>>(m, "Engine")
      .def_static(
          "load", [](const std::filesystem::path& dir) { return std::make_shared<Engine>(Engine::load(dir)); },
          py::arg("dir"))
      .def(
          "entity_name", [](const Engine& e, EntityId id) { return e.graph().entity(id).name; }, py::arg("id"))
      .def(
          "recommend",
          [](const Engine& e, const std::vector<std::pair<std::string, std::string>>& turns, std::size_t k) {
            return ranked_list(e, e.recommend(history_of(e, turns), k));
          },
          py::arg("turns"), py::arg("k") = 10,
          "Ranked (id, name, score) tuples for a history of (speaker, text) pairs.")
      .def(
          "act",
          [](const Engine& e, const std::vector<std::pair<std::string, std::string>>& turns) {
            const auto a = e.act(history_of(e, turns));
            py::dict d;
            d["recommendations"] = ranked_list(e, a.recommendation);
            d["response"] = a.response_text;
            d["explanation"] = a.explanation.text;
            d["source"] = std::string(to_string(a.explanation.source));
            d["path"] = render_path_hops(a.path, e.graph());
            return d;
          },
          py::arg("turns"));

  py::class_<ConversationService, std::shared_ptr<ConversationService>>(m, "Service")
      .def(py::init([](std::shared_ptr<Engine> engine, std::optional<std::filesystem::path> sessions) {
             std::optional<SessionStore> store;
             if (sessions) store.emplace(*sessions);
             return std::make_shared<ConversationService>(std::move(engine), std::move(store));
           }),
           py::arg("engine").none(true), py::arg("sessions") = py::none())
      .def("create_session", &ConversationService::create_session)
      .def(
          "post_turn",
          [](ConversationService& s, const std::string& id, const std::string& text) {
            TurnResult r;
            {
              py::gil_scoped_release release;
              r = s.post_turn(id, text);
            }
            return to_python(to_json(r));
          },
          py::arg("session_id"), py::arg("text"))
      .def(
          "transcript", [](const ConversationService& s, const std::string& id) { return to_python(s.get_transcript(id).turns()); },
          py::arg("session_id"))
      .def_property_readonly("model_loaded", &ConversationService::model_loaded);
}
