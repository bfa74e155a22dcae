#pragma once

#include <string>
#include <vector>

#include "openswe/common.hpp"

namespace openswe::diff {

// One per-file block of a unified diff, kept as an exact byte slice of the
// input so that routing blocks to different outputs preserves the original
// text.
struct FileBlock {
  std::string old_path;  // empty for /dev/null (new file)
  std::string new_path;  // empty for /dev/null (deletion)
  std::string text;      // verbatim slice including headers and hunks
  std::size_t start_line = 0;  // 1-based line number of the block header
};

// Splits a unified diff (git-style "diff --git" headers or bare ---/+++
// pairs) into per-file blocks. Throws MalformedPatchError with the offending
// line number when the text does not parse.
std::vector<FileBlock> parse_file_blocks(const std::string& patch);

// The effective path of a block for routing: new path, falling back to the
// old path for deletions.
std::string routing_path(const FileBlock& block);

}  // namespace openswe::diff
