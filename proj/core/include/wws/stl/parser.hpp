#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "wws/stl/formula.hpp"

namespace wws::stl {

/// Parses one formula. Precedence, loosest first: or, and, until_, then the prefix
/// operators not / alw_[a,b] / ev_[a,b]. Binary operators associate to the left.
/// Atoms are linear expressions such as `y >= 40` or `2*x1 + -1*x2 < 0.5`.
/// Throws ParseError with the byte offset of the offending token.
FormulaPtr parse(std::string_view text);

/// One formula per non-empty line; `#` starts a comment.
std::vector<FormulaPtr> parse_spec(std::string_view text);
std::vector<FormulaPtr> load_spec(const std::filesystem::path& path);

}  // namespace wws::stl
