#pragma once

// Library registry, dependency resolution and build-plan emission.
//
// Manifests are line oriented:
//
//   lib <name>
//   provides <api>
//   depends <library-or-api>
//   option <key> <default>
//
// with '#' comments. A requirement naming a declared API is satisfied by
// that API's provider; anything else must name a library.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uk/error.hpp"

namespace uk::compose {

// parse_error carrying the position of the offending token (1-based).
class ParseError : public Error {
 public:
  ParseError(std::string source, int line, int column, std::string_view what);

  const std::string& source() const noexcept { return source_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  std::string source_;
  int line_;
  int column_;
};

struct SourcePos {
  std::string source;
  int line = 0;
  int column = 0;
};

struct OptionSpec {
  std::string key;
  std::string default_value;
};

struct LibrarySpec {
  std::string name;
  std::vector<std::string> provides;
  std::vector<std::string> depends;  // declaration order
  std::vector<OptionSpec> options;
  SourcePos where;
  std::vector<SourcePos> depends_where;
};

struct ManifestText {
  std::string source;  // used in error positions
  std::string text;
};

class Registry {
 public:
  const std::vector<LibrarySpec>& libraries() const noexcept { return libs_; }
  const LibrarySpec* find(std::string_view name) const;
  bool is_api(std::string_view name) const;
  // Sorted by library name.
  std::vector<std::string> providers(std::string_view api) const;
  std::vector<std::string> apis() const;

 private:
  friend Registry parse_registry(const std::vector<ManifestText>&);
  std::vector<LibrarySpec> libs_;  // sorted by name
  std::map<std::string, std::vector<std::string>, std::less<>> providers_;
};

// Parses and merges manifests. Undeclared requirements are reported after
// the merge, so manifests may reference each other in any order.
Registry parse_registry(const std::vector<ManifestText>& manifests);
// Files and directories; a directory contributes its *.manifest files in
// name order.
Registry load_registry(const std::vector<std::filesystem::path>& paths);

// CONFIG_<LIB>=y|n toggles a library, CONFIG_<LIB>_<OPTION>=value sets an
// option. Names are the upper-cased library and option names. Last write wins.
struct Selections {
  std::map<std::string, bool> libraries;
  std::map<std::string, std::map<std::string, std::string>> options;  // lib -> key -> value
};

Selections parse_selections(std::string_view text, const Registry& registry,
                            std::string_view source = "<selections>");
Selections load_selections(const std::filesystem::path& path, const Registry& registry);

using ProviderChoices = std::map<std::string, std::string>;  // api -> library

struct Edge {
  std::string from;  // dependent
  std::string to;    // dependency
  auto operator<=>(const Edge&) const = default;
};

struct ResolvedGraph {
  std::vector<std::string> nodes;  // sorted
  std::vector<Edge> edges;         // sorted, deduplicated
  std::map<std::string, std::string> provider_of;
  // "<lib>.<option>" -> value, selection override or manifest default.
  std::map<std::string, std::string> config;
  // Names of APIs provided by selected nodes.
  std::vector<std::string> apis;

  bool contains(std::string_view lib) const;
};

ResolvedGraph resolve(const Registry& registry, const Selections& selections,
                      const ProviderChoices& choices = {});

std::string emit_dot(const ResolvedGraph& graph);

struct BuildPlan {
  std::vector<std::string> components;  // dependencies before dependents
  std::map<std::string, std::string> features;
  std::string hash;  // 16 hex digits, FNV-1a of the canonical JSON body

  std::string to_json() const;
  // C header with one #define per feature.
  std::string feature_header() const;
};

BuildPlan emit_build_plan(const ResolvedGraph& graph);

// "api=lib" pairs as given on the command line.
ProviderChoices parse_provider_choices(const std::vector<std::string>& pairs);

}  // namespace uk::compose
