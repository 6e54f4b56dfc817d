#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pcrd/features.hpp"

namespace pcrd::dsl {

// Three-way error taxonomy; every malformed or misbehaving program lands in
// exactly one class.
struct DslError {
  enum class Kind { Syntax, Semantic, Runtime };
  Kind kind = Kind::Syntax;
  std::string message;
  int line = 0;    // 1-based; 0 when not applicable
  int column = 0;  // 1-based; 0 when not applicable

  std::string to_string() const;
};

const char* kind_name(DslError::Kind kind);

template <typename T>
class DslResult {
 public:
  DslResult(T value) : data_(std::move(value)) {}
  DslResult(DslError error) : data_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(data_); }
  explicit operator bool() const { return ok(); }

  const T& value() const { return std::get<T>(data_); }
  T& value() { return std::get<T>(data_); }
  const DslError& error() const { return std::get<DslError>(data_); }

 private:
  std::variant<T, DslError> data_;
};

enum class BinaryOp {
  Add, Sub, Mul, Div,
  Lt, Le, Gt, Ge, Eq, Ne,
  And, Or,
};

enum class UnaryOp { Neg, Not };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Kind { Number, Feature, Unary, Binary, Ternary, Call };

  Kind kind = Kind::Number;
  double number = 0.0;
  std::string name;        // feature or builtin-call name
  int feature_index = -1;  // bound by validate()
  UnaryOp unary_op = UnaryOp::Neg;
  BinaryOp binary_op = BinaryOp::Add;
  std::vector<ExprPtr> args;  // operands: 1 unary, 2 binary, 3 ternary, n call
  int line = 0;
  int column = 0;
};

struct Term {
  std::string name;
  double weight = 0.0;
  ExprPtr body;
  int line = 0;
};

// Parsed, weighted-term reward program; the unit of search. Move-only; clone()
// when an independent copy is needed.
struct RewardProgram {
  std::vector<Term> terms;
  std::string source_text;

  RewardProgram() = default;
  RewardProgram(RewardProgram&&) = default;
  RewardProgram& operator=(RewardProgram&&) = default;
  RewardProgram(const RewardProgram&) = delete;
  RewardProgram& operator=(const RewardProgram&) = delete;

  RewardProgram clone() const;
};

inline constexpr int kMaxAstDepth = 64;

DslResult<RewardProgram> parse(std::string_view text);

// Binds feature identifiers to catalog indices; nullopt on success.
std::optional<DslError> validate(RewardProgram& program,
                                 const FeatureCatalog& catalog);

// Pre: validated program, all catalog features present and finite.
DslResult<double> evaluate(const RewardProgram& program,
                           const FeatureMap& features);

// Canonical text; parse(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const RewardProgram& program);

bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const RewardProgram& a, const RewardProgram& b);

struct StructuralDiff {
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::vector<std::string> reweighted;
  std::vector<std::string> bodies_changed;

  bool empty() const {
    return added.empty() && removed.empty() && reweighted.empty() &&
           bodies_changed.empty();
  }
  std::string to_string() const;
};

StructuralDiff structural_diff(const RewardProgram& old_program,
                               const RewardProgram& new_program);

// One-stop classification for `dsl check` and the taxonomy fixtures: parses,
// validates, then evaluates at the probe features (all zeros). Exactly one of
// {valid, Syntax, Semantic, Runtime} results.
struct Classification {
  bool valid = false;
  std::optional<DslError> error;  // set when !valid
  std::optional<double> probe_value;
};

Classification classify(std::string_view text, const FeatureCatalog& catalog);

// One-line grammar and builtin summary, embedded in environment briefs.
std::string grammar_summary();

}  // namespace pcrd::dsl
