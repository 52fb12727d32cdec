#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "smcsec/record.hpp"
#include "smcsec/smc/clopper_pearson.hpp"

namespace smcsec::smc {

enum class Comparator { less, less_equal, greater, greater_equal, equal };

inline std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::less: return "<";
    case Comparator::less_equal: return "<=";
    case Comparator::greater: return ">";
    case Comparator::greater_equal: return ">=";
    case Comparator::equal: return "=";
  }
  return "?";
}

/// Binary property over one named metric: `metric <cmp> threshold`.
struct PropertySpec {
  std::string metric;
  Comparator comparator = Comparator::greater_equal;
  double threshold = 0.0;

  bool holds(double value) const {
    switch (comparator) {
      case Comparator::less: return value < threshold;
      case Comparator::less_equal: return value <= threshold;
      case Comparator::greater: return value > threshold;
      case Comparator::greater_equal: return value >= threshold;
      case Comparator::equal: return value == threshold;
    }
    return false;
  }

  bool evaluate(const ExecutionRecord& record) const { return holds(record.metric(metric)); }

  /// Parses "name<op>value", e.g. "success>=1" or "sae_count>0".
  static PropertySpec parse(std::string_view text) {
    const auto fail = [&] { return std::invalid_argument("cannot parse property '" + std::string(text) + "'"); };
    const auto pos = text.find_first_of("<>=");
    if (pos == std::string_view::npos || pos == 0) throw fail();
    Comparator cmp = Comparator::equal;
    std::size_t len = 1;
    const bool or_equal = pos + 1 < text.size() && text[pos + 1] == '=';
    if (text[pos] == '<') {
      cmp = or_equal ? Comparator::less_equal : Comparator::less;
      len = or_equal ? 2 : 1;
    } else if (text[pos] == '>') {
      cmp = or_equal ? Comparator::greater_equal : Comparator::greater;
      len = or_equal ? 2 : 1;
    }
    const std::string rhs(text.substr(pos + len));
    std::size_t used = 0;
    double threshold = 0.0;
    try {
      threshold = std::stod(rhs, &used);
    } catch (const std::exception&) {
      throw fail();
    }
    if (used != rhs.size()) throw fail();
    return {std::string(text.substr(0, pos)), cmp, threshold};
  }

  std::string str() const {
    return metric + std::string(to_string(comparator)) + std::to_string(threshold);
  }
};

inline BernoulliSummary summarize(std::span<const ExecutionRecord> records, const PropertySpec& property) {
  BernoulliSummary summary;
  for (const auto& record : records) summary.add(property.evaluate(record));
  return summary;
}

}  // namespace smcsec::smc
