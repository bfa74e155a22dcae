#include "openswe/diff.hpp"

namespace openswe::diff {

namespace {

struct Line {
  std::size_t offset;  // byte offset of line start
  std::string text;    // without trailing newline
};

std::vector<Line> index_lines(const std::string& patch) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start < patch.size()) {
    std::size_t nl = patch.find('\n', start);
    std::size_t end = (nl == std::string::npos) ? patch.size() : nl;
    lines.push_back({start, patch.substr(start, end - start)});
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return lines;
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::string strip_ab_prefix(const std::string& raw) {
  std::string path = raw;
  // drop timestamp suffix some tools append after a tab
  std::size_t tab = path.find('\t');
  if (tab != std::string::npos) path = path.substr(0, tab);
  if (path == "/dev/null") return "";
  if (starts_with(path, "a/") || starts_with(path, "b/")) return path.substr(2);
  return path;
}

// "diff --git a/<old> b/<new>"
bool parse_git_header(const std::string& line, std::string& old_path, std::string& new_path) {
  const std::string prefix = "diff --git a/";
  if (!starts_with(line, prefix.c_str())) return false;
  std::string rest = line.substr(prefix.size());
  std::size_t sep = rest.find(" b/");
  if (sep == std::string::npos) return false;
  old_path = rest.substr(0, sep);
  new_path = rest.substr(sep + 3);
  return true;
}

bool is_extended_header(const std::string& line) {
  return starts_with(line, "index ") || starts_with(line, "old mode") ||
         starts_with(line, "new mode") || starts_with(line, "deleted file mode") ||
         starts_with(line, "new file mode") || starts_with(line, "copy from") ||
         starts_with(line, "copy to") || starts_with(line, "rename from") ||
         starts_with(line, "rename to") || starts_with(line, "similarity index") ||
         starts_with(line, "dissimilarity index") || starts_with(line, "Binary files") ||
         starts_with(line, "GIT binary patch");
}

// "@@ -a[,b] +c[,d] @@ ..."; b and d default to 1 when omitted.
bool parse_hunk_header(const std::string& line, std::size_t& old_count,
                       std::size_t& new_count) {
  if (!starts_with(line, "@@ -")) return false;
  std::size_t close = line.find(" @@", 4);
  if (close == std::string::npos) return false;
  std::size_t plus = line.find(" +", 4);
  if (plus == std::string::npos || plus > close) return false;

  auto parse_range = [](const std::string& range, std::size_t& count) {
    std::size_t comma = range.find(',');
    std::string count_str = (comma == std::string::npos) ? "1" : range.substr(comma + 1);
    try {
      count = static_cast<std::size_t>(std::stoul(count_str));
    } catch (const std::exception&) {
      return false;
    }
    return true;
  };
  return parse_range(line.substr(4, plus - 4), old_count) &&
         parse_range(line.substr(plus + 2, close - plus - 2), new_count);
}

}  // namespace

std::string routing_path(const FileBlock& block) {
  return block.new_path.empty() ? block.old_path : block.new_path;
}

std::vector<FileBlock> parse_file_blocks(const std::string& patch) {
  std::vector<FileBlock> blocks;
  auto lines = index_lines(patch);

  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i].text;
    std::size_t block_start_line = i + 1;
    std::size_t block_offset = lines[i].offset;
    std::string old_path;
    std::string new_path;

    if (parse_git_header(line, old_path, new_path)) {
      ++i;
      while (i < lines.size() && is_extended_header(lines[i].text)) ++i;
      if (i < lines.size() && starts_with(lines[i].text, "--- ")) {
        old_path = strip_ab_prefix(lines[i].text.substr(4));
        ++i;
        if (i >= lines.size() || !starts_with(lines[i].text, "+++ ")) {
          throw MalformedPatchError("expected '+++' after '---'", i + 1);
        }
        new_path = strip_ab_prefix(lines[i].text.substr(4));
        ++i;
      }
    } else if (starts_with(line, "--- ")) {
      old_path = strip_ab_prefix(line.substr(4));
      ++i;
      if (i >= lines.size() || !starts_with(lines[i].text, "+++ ")) {
        throw MalformedPatchError("expected '+++' after '---'", i + 1);
      }
      new_path = strip_ab_prefix(lines[i].text.substr(4));
      ++i;
    } else {
      throw MalformedPatchError("expected file header, got: " + line, block_start_line);
    }

    // hunks, consumed by the counts declared in each @@ header
    bool saw_hunk = false;
    while (i < lines.size()) {
      const std::string& l = lines[i].text;
      std::size_t old_count = 0;
      std::size_t new_count = 0;
      if (parse_hunk_header(l, old_count, new_count)) {
        saw_hunk = true;
        ++i;
        while ((old_count > 0 || new_count > 0) && i < lines.size()) {
          const std::string& body = lines[i].text;
          char c = body.empty() ? ' ' : body[0];
          switch (c) {
            case ' ':
              if (old_count == 0 || new_count == 0) {
                throw MalformedPatchError("hunk longer than declared", i + 1);
              }
              --old_count;
              --new_count;
              break;
            case '-':
              if (old_count == 0) {
                throw MalformedPatchError("hunk longer than declared", i + 1);
              }
              --old_count;
              break;
            case '+':
              if (new_count == 0) {
                throw MalformedPatchError("hunk longer than declared", i + 1);
              }
              --new_count;
              break;
            case '\\':
              break;  // "\ No newline at end of file", not counted
            default:
              throw MalformedPatchError("unexpected line inside hunk: " + body, i + 1);
          }
          ++i;
        }
        if (old_count > 0 || new_count > 0) {
          throw MalformedPatchError("truncated hunk", i + 1);
        }
        // trailing "\ No newline at end of file"
        while (i < lines.size() && starts_with(lines[i].text, "\\")) ++i;
        continue;
      }
      if (starts_with(l, "diff --git ") ||
          (starts_with(l, "--- ") && i + 1 < lines.size() &&
           starts_with(lines[i + 1].text, "+++ "))) {
        break;  // next file block
      }
      if (!saw_hunk && is_extended_header(l)) {
        ++i;  // e.g. binary-file notice after headers
        continue;
      }
      throw MalformedPatchError("unexpected line inside diff: " + l, i + 1);
    }

    std::size_t block_end = (i < lines.size()) ? lines[i].offset : patch.size();
    FileBlock block;
    block.old_path = std::move(old_path);
    block.new_path = std::move(new_path);
    block.text = patch.substr(block_offset, block_end - block_offset);
    block.start_line = block_start_line;
    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace openswe::diff
