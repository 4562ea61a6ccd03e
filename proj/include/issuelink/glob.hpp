// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace issuelink
{

/// Path glob: `*` and `?` stay within one path segment, `**` spans segments
/// (and `**/` may match nothing), `[abc]` / `[a-z]` / `[!x]` are classes.
class Glob
{
  public:
    /// Throws ToolError with a syntax explanation for invalid patterns
    /// (empty, unterminated class).
    explicit Glob(std::string pattern);

    [[nodiscard]] auto matches(std::string_view path) const -> bool;
    [[nodiscard]] auto pattern() const -> const std::string& { return _pattern; }

  private:
    std::string _pattern;
};

} // namespace issuelink
