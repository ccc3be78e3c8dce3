#pragma once

#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "scgid/temporal.hpp"

namespace scgid {

/// A variable inside an estimand: a series at a non-positive offset from the
/// query's reference time. Offset 0 renders as "Y_t", -2 as "Y_{t-2}".
struct EstimandVar {
    Series series;
    int offset = 0;

    std::string text() const {
        if (offset == 0) return series + "_t";
        return series + "_{t-" + std::to_string(-offset) + "}";
    }

    TemporalVertex at(int reference_time) const { return {series, reference_time + offset}; }

    friend bool operator==(const EstimandVar&, const EstimandVar&) = default;
    friend auto operator<=>(const EstimandVar& l, const EstimandVar& r) {
        if (auto c = l.series <=> r.series; c != 0) return c;
        return r.offset <=> l.offset; // recent first, matches written order
    }
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// E[target | var=symbol, ..., Set=symbol, ...]
struct Expectation {
    EstimandVar target;
    std::vector<std::pair<EstimandVar, std::string>> scalar_given;
    std::vector<std::pair<std::string, std::string>> set_given; // (set name, value symbol)
};

/// P(Set=symbol, ... | var=symbol, ..., Set=symbol, ...)
struct Probability {
    std::vector<std::pair<std::string, std::string>> set_targets;
    std::vector<std::pair<EstimandVar, std::string>> scalar_given;
    std::vector<std::pair<std::string, std::string>> set_given;
};

struct SumOver {
    std::string set_name;
    std::string symbol;
    ExprPtr body;
};

struct Product {
    std::vector<ExprPtr> factors;
};

struct Difference {
    ExprPtr lhs;
    ExprPtr rhs;
};

struct Expr {
    std::variant<Expectation, Probability, SumOver, Product, Difference> node;
};

inline ExprPtr make_expr(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

/// Symbolic adjustment formula over observed variables only: conditional
/// expectations, conditional probabilities, sums over value assignments of
/// named variable sets, products and differences. No intervention operator
/// exists in this tree by construction.
struct Estimand {
    ExprPtr root;
    std::map<std::string, std::vector<EstimandVar>> sets; // role name -> variables

    std::set<EstimandVar> variables() const {
        std::set<EstimandVar> out;
        collect_vars(root, out);
        for (const auto& [name, vars] : sets) out.insert(vars.begin(), vars.end());
        return out;
    }

    std::string text() const {
        std::ostringstream os;
        render(root, os);
        for (const auto& [name, vars] : sets) {
            os << "\n  where " << name << " = {";
            bool first = true;
            for (const auto& v : vars) {
                if (!first) os << ", ";
                os << v.text();
                first = false;
            }
            os << "}";
        }
        return os.str();
    }

private:
    static void render_conditions(std::ostringstream& os,
                                  const std::vector<std::pair<EstimandVar, std::string>>& scalars,
                                  const std::vector<std::pair<std::string, std::string>>& sets,
                                  bool leading_bar) {
        bool first = true;
        for (const auto& [v, sym] : scalars) {
            os << (first ? (leading_bar ? " | " : "") : ", ") << v.text() << "=" << sym;
            first = false;
        }
        for (const auto& [s, sym] : sets) {
            os << (first ? (leading_bar ? " | " : "") : ", ") << s << "=" << sym;
            first = false;
        }
    }

    static void render(const ExprPtr& e, std::ostringstream& os) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Expectation>) {
                    os << "E[" << n.target.text();
                    render_conditions(os, n.scalar_given, n.set_given, true);
                    os << "]";
                } else if constexpr (std::is_same_v<T, Probability>) {
                    os << "P(";
                    bool first = true;
                    for (const auto& [s, sym] : n.set_targets) {
                        os << (first ? "" : ", ") << s << "=" << sym;
                        first = false;
                    }
                    if (!n.scalar_given.empty() || !n.set_given.empty())
                        render_conditions(os, n.scalar_given, n.set_given, true);
                    os << ")";
                } else if constexpr (std::is_same_v<T, SumOver>) {
                    os << "sum_" << n.symbol << " ( ";
                    render(n.body, os);
                    os << " )";
                } else if constexpr (std::is_same_v<T, Product>) {
                    bool first = true;
                    for (const auto& f : n.factors) {
                        if (!first) os << " * ";
                        bool paren = std::holds_alternative<Difference>(f->node);
                        if (paren) os << "(";
                        render(f, os);
                        if (paren) os << ")";
                        first = false;
                    }
                } else if constexpr (std::is_same_v<T, Difference>) {
                    render(n.lhs, os);
                    os << " - ";
                    render(n.rhs, os);
                }
            },
            e->node);
    }

    static void collect_vars(const ExprPtr& e, std::set<EstimandVar>& out) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Expectation>) {
                    out.insert(n.target);
                    for (const auto& [v, sym] : n.scalar_given) out.insert(v);
                } else if constexpr (std::is_same_v<T, Probability>) {
                    for (const auto& [v, sym] : n.scalar_given) out.insert(v);
                } else if constexpr (std::is_same_v<T, SumOver>) {
                    collect_vars(n.body, out);
                } else if constexpr (std::is_same_v<T, Product>) {
                    for (const auto& f : n.factors) collect_vars(f, out);
                } else if constexpr (std::is_same_v<T, Difference>) {
                    collect_vars(n.lhs, out);
                    collect_vars(n.rhs, out);
                }
            },
            e->node);
    }
};

} // namespace scgid
