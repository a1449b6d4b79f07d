// Python face of the toolkit: load/prepare data, train the rule learners and
// the boosted-tree black box, run the voting ensemble, evaluate, and round-trip
// models through their text form. Values cross the boundary as native python
// types (missing -> None, numbers -> Rational); exact fractions stay exact.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rulevote/bench.hpp"
#include "rulevote/csv.hpp"
#include "rulevote/dataset.hpp"
#include "rulevote/decider.hpp"
#include "rulevote/foil.hpp"
#include "rulevote/gbt.hpp"
#include "rulevote/metrics.hpp"
#include "rulevote/model.hpp"
#include "rulevote/parallel.hpp"
#include "rulevote/recipe.hpp"
#include "rulevote/ripper.hpp"
#include "rulevote/rule.hpp"
#include "rulevote/serialize.hpp"
#include "rulevote/tree.hpp"
#include "rulevote/voting.hpp"

namespace py = pybind11;
using namespace rulevote;

namespace {

Rational fraction_from(const py::object& obj, const char* what) {
  if (py::isinstance<Rational>(obj)) return obj.cast<Rational>();
  if (py::isinstance<py::int_>(obj)) return Rational(obj.cast<std::int64_t>());
  if (py::isinstance<py::str>(obj)) {
    auto parsed = Rational::parse(obj.cast<std::string>());
    if (parsed) return *parsed;
  }
  throw std::invalid_argument(std::string(what) +
                              " must be a Rational, an int, or a fraction string like '7/10'");
}

py::object value_to_python(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Missing: return py::none();
    case Value::Kind::Number: return py::cast(v.number);
    case Value::Kind::Text: return py::cast(v.text);
  }
  return py::none();
}

Value value_from_python(const py::handle& obj) {
  if (obj.is_none()) return Value::missing();
  if (py::isinstance<Rational>(obj)) return Value::num(obj.cast<Rational>());
  if (py::isinstance<py::bool_>(obj)) return Value::num(Rational(obj.cast<bool>() ? 1 : 0));
  if (py::isinstance<py::int_>(obj)) return Value::num(Rational(obj.cast<std::int64_t>()));
  if (py::isinstance<py::float_>(obj)) {
    auto parsed = Rational::parse(py::str(obj).cast<std::string>());
    if (!parsed) throw std::invalid_argument("float cell is not representable exactly");
    return Value::num(*parsed);
  }
  if (py::isinstance<py::str>(obj)) {
    std::string text = obj.cast<std::string>();
    auto parsed = Rational::parse(text);
    return parsed ? Value::num(*parsed) : Value::str(std::move(text));
  }
  throw std::invalid_argument("cell must be None, a number, a Rational, or a string");
}

Dataset dataset_from_rows(const std::vector<std::string>& attr_names,
                          const std::string& label_name, const py::sequence& rows,
                          const py::object& labels) {
  DatasetBuilder builder(attr_names, label_name);
  std::optional<py::sequence> label_seq;
  if (!labels.is_none()) label_seq = labels.cast<py::sequence>();
  std::int64_t id = 0;
  for (const py::handle& row : rows) {
    auto cells_seq = row.cast<py::sequence>();
    std::vector<Value> cells;
    cells.reserve(attr_names.size());
    for (const py::handle& cell : cells_seq) cells.push_back(value_from_python(cell));
    std::optional<std::string> label;
    if (label_seq) {
      py::object l = (*label_seq)[static_cast<std::size_t>(id)];
      if (!l.is_none()) label = l.cast<std::string>();
    }
    builder.add_row(std::move(cells), std::move(label), id);
    ++id;
  }
  return builder.build();
}

std::vector<std::optional<std::string>> model_predict(const MultiClassRuleModel& model,
                                                      const Dataset& ds, unsigned jobs) {
  CompiledModel compiled(model, ds.header());
  std::vector<std::optional<std::string>> out(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t r) {
    out[r] = compiled.predict(ds.instance(r)).predicted_label;
  });
  return out;
}

std::vector<std::string> gbt_predict_all(const GbtModel& model, const Dataset& ds,
                                         unsigned jobs) {
  std::vector<std::string> out(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t r) {
    out[r] = gbt_predict(model, ds.instance(r));
  });
  return out;
}

std::unique_ptr<Decider> build_decider(const std::string& kind, const py::object& train_data,
                                       const py::object& gbt_model, const Dataset& test) {
  std::unique_ptr<Decider> decider;
  if (kind == "oracle") {
    decider = std::make_unique<OracleDecider>();
    decider->train(test);
    return decider;
  }
  if (kind == "gbt" && !gbt_model.is_none()) {
    return std::make_unique<GbtDecider>(gbt_model.cast<GbtModel>());
  }
  if (kind == "gbt") {
    decider = std::make_unique<GbtDecider>();
  } else if (kind == "tree") {
    decider = std::make_unique<TreeDecider>();
  } else {
    throw std::invalid_argument("decider must be 'gbt', 'tree', or 'oracle'");
  }
  if (train_data.is_none()) {
    throw std::invalid_argument("decider '" + kind + "' needs decider_train data");
  }
  decider->train(train_data.cast<Dataset>());
  return decider;
}

std::vector<VotingResult> ensemble(const std::vector<MultiClassRuleModel>& models,
                                   const Dataset& test, const std::string& decider,
                                   const py::object& decider_train, const py::object& gbt_model,
                                   const py::object& threshold, const py::object& tolerance,
                                   const py::object& multiclass, unsigned jobs) {
  VotingConfig cfg;
  cfg.threshold = fraction_from(threshold, "threshold");
  cfg.tolerance = fraction_from(tolerance, "tolerance");
  cfg.multiclass = multiclass.is_none() ? test.header().labels.size() > 2
                                        : multiclass.cast<bool>();
  auto box = build_decider(decider, decider_train, gbt_model, test);
  return run_ensemble(models, *box, test, cfg, jobs);
}

py::dict report_to_dict(const EvalReport& r) {
  py::dict d;
  d["total"] = r.total;
  d["correct"] = r.correct;
  d["abstained"] = r.abstained;
  d["accuracy"] = r.accuracy;
  d["macro_precision"] = r.macro_precision;
  d["macro_recall"] = r.macro_recall;
  d["abstention_rate"] = r.abstention_rate;
  py::dict steps;
  for (const auto& [step, share] : r.step_distribution) steps[py::int_(step)] = share;
  d["step_distribution"] = steps;
  py::dict levels;
  for (const auto& [level, share] : r.explainability_distribution) {
    levels[py::str(to_string(level))] = share;
  }
  d["explainability"] = levels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rulevote, m) {
  m.doc() = "rule induction with an explainable voting ensemble";

  py::class_<Rational>(m, "Rational")
      .def(py::init<std::int64_t>(), py::arg("numerator"))
      .def(py::init<std::int64_t, std::int64_t>(), py::arg("numerator"), py::arg("denominator"))
      .def_static("parse",
                  [](const std::string& text) {
                    auto r = Rational::parse(text);
                    if (!r) throw std::invalid_argument("not a rational: '" + text + "'");
                    return *r;
                  },
                  py::arg("text"))
      .def_property_readonly("numerator", &Rational::num)
      .def_property_readonly("denominator", &Rational::den)
      .def("__float__", &Rational::to_double)
      .def("__str__", &Rational::to_string)
      .def("__repr__",
           [](const Rational& r) { return "Rational('" + r.to_string() + "')"; })
      .def("__eq__", [](const Rational& a, const Rational& b) { return a == b; },
           py::is_operator())
      .def("__lt__", [](const Rational& a, const Rational& b) { return a < b; },
           py::is_operator())
      .def("__hash__", [](const Rational& r) { return std::hash<Rational>{}(r); });

  py::class_<Literal>(m, "Literal")
      .def_readonly("attr", &Literal::attr)
      .def("__str__", &Literal::to_string)
      .def("__repr__", [](const Literal& l) { return "Literal('" + l.to_string() + "')"; })
      .def("__eq__", [](const Literal& a, const Literal& b) { return a == b; },
           py::is_operator());

  py::class_<Rule>(m, "Rule")
      .def_readonly("target_label", &Rule::target_label)
      .def_readonly("body", &Rule::body)
      .def("__len__", [](const Rule& r) { return r.body.size(); })
      .def("__str__", [](const Rule& r) { return rule_line(r, "label"); })
      .def("__eq__", [](const Rule& a, const Rule& b) { return a == b; }, py::is_operator());

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("attr_names",
                             [](const Dataset& ds) {
                               std::vector<std::string> names;
                               for (const auto& a : ds.header().attrs) names.push_back(a.name);
                               return names;
                             })
      .def_property_readonly("label_name",
                             [](const Dataset& ds) { return ds.header().label_name; })
      .def_property_readonly("labels", [](const Dataset& ds) { return ds.header().labels; })
      .def("label",
           [](const Dataset& ds, std::size_t row) -> py::object {
             if (row >= ds.size()) throw std::out_of_range("row out of range");
             if (ds.label_code(row) == Dataset::kMissing) return py::none();
             return py::cast(ds.label(row));
           },
           py::arg("row"))
      .def("id",
           [](const Dataset& ds, std::size_t row) {
             if (row >= ds.size()) throw std::out_of_range("row out of range");
             return ds.id(row);
           },
           py::arg("row"))
      .def("value",
           [](const Dataset& ds, std::size_t row, std::size_t col) {
             if (row >= ds.size() || col >= ds.attr_count()) {
               throw std::out_of_range("cell out of range");
             }
             return value_to_python(ds.value(row, col));
           },
           py::arg("row"), py::arg("col"))
      .def("row",
           [](const Dataset& ds, std::size_t row) {
             if (row >= ds.size()) throw std::out_of_range("row out of range");
             py::list cells;
             for (std::size_t c = 0; c < ds.attr_count(); ++c) {
               cells.append(value_to_python(ds.value(row, c)));
             }
             return cells;
           },
           py::arg("row"))
      .def("split",
           [](const Dataset& ds, const py::object& test_fraction, std::uint64_t seed) {
             return ds.split(fraction_from(test_fraction, "test_fraction"), seed);
           },
           py::arg("test_fraction"), py::arg("seed") = 0)
      .def("select_rows", &Dataset::select_rows, py::arg("rows"))
      .def("to_csv", [](const Dataset& ds, const std::string& path) { write_csv(ds, path); },
           py::arg("path"))
      .def("__repr__", [](const Dataset& ds) {
        std::ostringstream out;
        out << "Dataset(" << ds.size() << " rows, " << ds.attr_count() << " attrs, label '"
            << ds.header().label_name << "')";
        return out.str();
      });

  py::class_<Recipe>(m, "Recipe")
      .def_static("parse", &parse_recipe, py::arg("text"))
      .def_static("load", &load_recipe_file, py::arg("path"))
      .def("apply", [](const Recipe& r, const Dataset& ds) { return apply_recipe(ds, r); },
           py::arg("dataset"))
      .def("__str__", &recipe_to_string);

  py::class_<MultiClassRuleModel>(m, "RuleModel")
      .def_readonly("learner_name", &MultiClassRuleModel::learner_name)
      .def_readonly("label_name", &MultiClassRuleModel::label_name)
      .def_readonly("labels", &MultiClassRuleModel::labels)
      .def("rules_for",
           [](const MultiClassRuleModel& m, const std::string& label) {
             const RuleSet* rs = m.ruleset_for(label);
             if (!rs) throw std::invalid_argument("model has no label '" + label + "'");
             return rs->rules;
           },
           py::arg("label"))
      .def("rule_count",
           [](const MultiClassRuleModel& m) {
             std::size_t n = 0;
             for (const RuleSet& rs : m.per_label) n += rs.rules.size();
             return n;
           })
      .def("predict", &model_predict, py::arg("dataset"), py::arg("jobs") = 1)
      .def("serialize", &serialize_rules)
      .def_static("parse", &parse_rules, py::arg("text"))
      .def("save", &save_model_file, py::arg("path"))
      .def_static("load", &load_model_file, py::arg("path"))
      .def("__repr__", [](const MultiClassRuleModel& m) {
        std::size_t n = 0;
        for (const RuleSet& rs : m.per_label) n += rs.rules.size();
        std::ostringstream out;
        out << "RuleModel(" << m.learner_name << ", " << m.labels.size() << " labels, " << n
            << " rules)";
        return out.str();
      });

  py::class_<GbtModel>(m, "GbtModel")
      .def("predict", &gbt_predict_all, py::arg("dataset"), py::arg("jobs") = 1)
      .def("serialize", &serialize_gbt)
      .def_static("parse", &parse_gbt, py::arg("text"))
      .def("save", &save_gbt, py::arg("path"))
      .def_static("load", &load_gbt, py::arg("path"))
      .def("__repr__", [](const GbtModel& m) {
        std::ostringstream out;
        out << "GbtModel(" << m.labels.size() << " labels)";
        return out.str();
      });

  py::class_<VotingResult>(m, "VotingResult")
      .def_readonly("label", &VotingResult::label)
      .def_readonly("step", &VotingResult::step)
      .def_readonly("learner", &VotingResult::learner)
      .def_readonly("rule", &VotingResult::rule)
      .def_readonly("fraction", &VotingResult::fraction)
      .def_property_readonly("level",
                             [](const VotingResult& r) { return to_string(r.level); })
      .def("__repr__", [](const VotingResult& r) {
        std::ostringstream out;
        out << "VotingResult(step " << r.step << ", "
            << (r.label ? "'" + *r.label + "'" : std::string("abstained")) << ")";
        return out.str();
      });

  m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_name"),
        "Load a CSV file; the named column becomes the class label.");
  m.def("dataset_from_rows", &dataset_from_rows, py::arg("attr_names"), py::arg("label_name"),
        py::arg("rows"), py::arg("labels") = py::none(),
        "Build a dataset from python rows; labels is an optional parallel list.");

  m.def("train_foil",
        [](const Dataset& train, unsigned jobs) { return train_foil_model(train, jobs); },
        py::arg("train"), py::arg("jobs") = 1);
  m.def("train_ripper",
        [](const Dataset& train, int k, std::uint64_t seed, bool final_covering, unsigned jobs) {
          RipperConfig cfg;
          cfg.k = k;
          cfg.seed = seed;
          cfg.final_covering = final_covering;
          return train_ripper_model(train, cfg, jobs);
        },
        py::arg("train"), py::arg("k") = 2, py::arg("seed") = 0,
        py::arg("final_covering") = true, py::arg("jobs") = 1);
  m.def("train_tree",
        [](const Dataset& train, int max_depth, std::size_t min_leaf) {
          TreeConfig cfg;
          cfg.max_depth = max_depth;
          cfg.min_leaf = min_leaf;
          return tree_to_rules(train_tree(train, cfg), train.header());
        },
        py::arg("train"), py::arg("max_depth") = -1, py::arg("min_leaf") = 1,
        "Train a classification tree and return it as an equivalent rule model.");
  m.def("train_gbt",
        [](const Dataset& train, int rounds, int depth, double learning_rate, double lambda_reg) {
          GbtConfig cfg;
          cfg.rounds = rounds;
          cfg.depth = depth;
          cfg.learning_rate = learning_rate;
          cfg.lambda_reg = lambda_reg;
          return gbt_train(train, cfg);
        },
        py::arg("train"), py::arg("rounds") = 100, py::arg("depth") = 3,
        py::arg("learning_rate") = 0.1, py::arg("lambda_reg") = 1.0);

  m.def("match_fraction",
        [](const Rule& rule, const Dataset& ds, std::size_t row) {
          if (row >= ds.size()) throw std::out_of_range("row out of range");
          return match_fraction(rule, ds.instance(row));
        },
        py::arg("rule"), py::arg("dataset"), py::arg("row"),
        "Fraction of the rule's conditions the given row satisfies.");

  m.def("run_ensemble", &ensemble, py::arg("models"), py::arg("test"),
        py::arg("decider") = "gbt", py::arg("decider_train") = py::none(),
        py::arg("gbt_model") = py::none(), py::arg("threshold") = "7/10",
        py::arg("tolerance") = "1/10", py::arg("multiclass") = py::none(),
        py::arg("jobs") = 1,
        "Four-step voting over rule models; multiclass defaults to label count > 2.");

  m.def("evaluate",
        [](const py::sequence& predictions, const Dataset& truth) {
          if (predictions.size() > 0 && py::isinstance<VotingResult>(predictions[0])) {
            return report_to_dict(
                evaluate(predictions.cast<std::vector<VotingResult>>(), truth));
          }
          return report_to_dict(
              evaluate(predictions.cast<std::vector<std::optional<std::string>>>(), truth));
        },
        py::arg("predictions"), py::arg("truth"),
        "Score predictions (labels, None for abstentions, or VotingResults) against the truth.");

  m.def("bench",
        [](const std::string& suite, const std::string& data_dir, const std::string& recipe_dir,
           unsigned reps, std::uint64_t seed, unsigned jobs) {
          return bench_table(run_bench(find_suite(suite), data_dir, recipe_dir, reps, seed, jobs));
        },
        py::arg("suite"), py::arg("data_dir") = "data", py::arg("recipe_dir") = "recipes",
        py::arg("reps") = 10, py::arg("seed") = 1, py::arg("jobs") = 1,
        "Run one benchmark suite and return the summary table as text.");
}
