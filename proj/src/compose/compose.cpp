#include "uk/compose.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uk/hash.hpp"

namespace uk::compose {

namespace {

std::string format_pos(const std::string& source, int line, int column, std::string_view what) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
         std::string(what);
}

struct Token {
  std::string_view text;
  int column;
};

// Whitespace split with '#' comments removed; columns are 1-based.
std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != '#' && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

bool is_ident(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view l = text.substr(start, nl - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    start = nl + 1;
  }
  return lines;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(Errc::not_found, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void add_unique(std::vector<std::string>& v, std::string_view s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.emplace_back(s);
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

ParseError::ParseError(std::string source, int line, int column, std::string_view what)
    : Error(Errc::parse_error, format_pos(source, line, column, what)),
      source_(std::move(source)),
      line_(line),
      column_(column) {}

const LibrarySpec* Registry::find(std::string_view name) const {
  auto it = std::lower_bound(libs_.begin(), libs_.end(), name,
                             [](const LibrarySpec& l, std::string_view n) { return l.name < n; });
  if (it == libs_.end() || it->name != name) return nullptr;
  return &*it;
}

bool Registry::is_api(std::string_view name) const { return providers_.find(name) != providers_.end(); }

std::vector<std::string> Registry::providers(std::string_view api) const {
  auto it = providers_.find(api);
  if (it == providers_.end()) return {};
  return it->second;
}

std::vector<std::string> Registry::apis() const {
  std::vector<std::string> out;
  for (const auto& [api, libs] : providers_) out.push_back(api);
  return out;
}

Registry parse_registry(const std::vector<ManifestText>& manifests) {
  Registry reg;
  std::map<std::string, SourcePos> seen;

  for (const ManifestText& m : manifests) {
    LibrarySpec* cur = nullptr;
    int lineno = 0;
    for (std::string_view line : split_lines(m.text)) {
      ++lineno;
      const auto toks = tokenize(line);
      if (toks.empty()) continue;
      const std::string_view kw = toks[0].text;
      auto fail = [&](int col, std::string_view what) -> void {
        throw ParseError(m.source, lineno, col, what);
      };
      auto end_col = [&] {
        return toks.back().column + static_cast<int>(toks.back().text.size());
      };
      const std::size_t want = kw == "option" ? 3 : 2;
      if (kw != "lib" && kw != "provides" && kw != "depends" && kw != "option") {
        fail(toks[0].column, "unknown directive '" + std::string(kw) + "'");
      }
      if (toks.size() < want) fail(end_col(), "missing argument to " + std::string(kw));
      if (toks.size() > want) fail(toks[want].column, "unexpected token");
      const Token& arg = toks[1];
      if (!is_ident(arg.text)) {
        fail(arg.column, "bad name '" + std::string(arg.text) + "'");
      }

      if (kw == "lib") {
        const std::string name(arg.text);
        if (auto it = seen.find(name); it != seen.end()) {
          raise(Errc::duplicate_library,
                format_pos(m.source, lineno, arg.column,
                           "library " + name + " already declared at " + it->second.source + ":" +
                               std::to_string(it->second.line)));
        }
        SourcePos pos{m.source, lineno, arg.column};
        seen.emplace(name, pos);
        reg.libs_.push_back({});
        cur = &reg.libs_.back();
        cur->name = name;
        cur->where = pos;
        continue;
      }
      if (cur == nullptr) fail(toks[0].column, std::string(kw) + " outside a lib block");
      if (kw == "provides") {
        add_unique(cur->provides, arg.text);
      } else if (kw == "depends") {
        if (std::find(cur->depends.begin(), cur->depends.end(), arg.text) == cur->depends.end()) {
          cur->depends.emplace_back(arg.text);
          cur->depends_where.push_back({m.source, lineno, arg.column});
        }
      } else {
        for (const auto& o : cur->options) {
          if (o.key == arg.text) fail(arg.column, "duplicate option " + o.key);
        }
        cur->options.push_back({std::string(arg.text), std::string(toks[2].text)});
      }
    }
  }

  std::sort(reg.libs_.begin(), reg.libs_.end(),
            [](const LibrarySpec& a, const LibrarySpec& b) { return a.name < b.name; });
  for (const auto& lib : reg.libs_) {
    for (const auto& api : lib.provides) reg.providers_[api].push_back(lib.name);
  }
  for (const auto& lib : reg.libs_) {
    for (std::size_t i = 0; i < lib.depends.size(); ++i) {
      const std::string& r = lib.depends[i];
      if (!reg.is_api(r) && reg.find(r) == nullptr) {
        const SourcePos& p = lib.depends_where[i];
        throw ParseError(p.source, p.line, p.column, "undeclared library or API '" + r + "'");
      }
    }
  }
  return reg;
}

Registry load_registry(const std::vector<std::filesystem::path>& paths) {
  std::vector<ManifestText> texts;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".manifest") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) texts.push_back({f.string(), read_file(f)});
    } else {
      texts.push_back({p.string(), read_file(p)});
    }
  }
  return parse_registry(texts);
}

Selections parse_selections(std::string_view text, const Registry& registry,
                            std::string_view source) {
  Selections sel;
  const std::string src(source);
  int lineno = 0;
  for (std::string_view line : split_lines(text)) {
    ++lineno;
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    std::size_t e = line.size();
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    if (b == e || line[b] == '#') continue;
    const int col = static_cast<int>(b) + 1;
    std::string_view body = line.substr(b, e - b);

    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(src, lineno, col + static_cast<int>(body.size()), "expected '='");
    std::string_view key = body.substr(0, eq);
    std::string_view value = body.substr(eq + 1);
    const int value_col = col + static_cast<int>(eq) + 1;
    if (!key.starts_with("CONFIG_") || key.size() == 7) {
      throw ParseError(src, lineno, col, "expected CONFIG_<NAME>");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (value.empty()) throw ParseError(src, lineno, value_col, "empty value");
    const std::string_view sym = key.substr(7);

    bool matched = false;
    for (const auto& lib : registry.libraries()) {
      if (upper(lib.name) == sym) {
        if (value != "y" && value != "n") {
          throw ParseError(src, lineno, value_col, "library toggle must be y or n");
        }
        sel.libraries[lib.name] = value == "y";
        matched = true;
        break;
      }
    }
    if (matched) continue;
    // Option symbol: longest library prefix that has a matching option.
    const LibrarySpec* best = nullptr;
    const OptionSpec* best_opt = nullptr;
    for (const auto& lib : registry.libraries()) {
      const std::string prefix = upper(lib.name) + "_";
      if (!sym.starts_with(prefix)) continue;
      if (best != nullptr && best->name.size() >= lib.name.size()) continue;
      for (const auto& o : lib.options) {
        if (upper(o.key) == sym.substr(prefix.size())) {
          best = &lib;
          best_opt = &o;
        }
      }
    }
    if (best == nullptr) {
      throw ParseError(src, lineno, col, "unknown symbol " + std::string(key));
    }
    sel.options[best->name][best_opt->key] = std::string(value);
  }
  return sel;
}

Selections load_selections(const std::filesystem::path& path, const Registry& registry) {
  return parse_selections(read_file(path), registry, path.string());
}

bool ResolvedGraph::contains(std::string_view lib) const {
  return std::binary_search(nodes.begin(), nodes.end(), lib);
}

ResolvedGraph resolve(const Registry& registry, const Selections& selections,
                      const ProviderChoices& choices) {
  auto disabled = [&](const std::string& lib) {
    auto it = selections.libraries.find(lib);
    return it != selections.libraries.end() && !it->second;
  };
  auto enabled = [&](const std::string& lib) {
    auto it = selections.libraries.find(lib);
    return it != selections.libraries.end() && it->second;
  };

  ResolvedGraph g;
  for (const auto& [api, lib] : choices) {
    if (!registry.is_api(api)) raise(Errc::unsatisfied_dependency, "no such API " + api);
    const LibrarySpec* spec = registry.find(lib);
    if (spec == nullptr ||
        std::find(spec->provides.begin(), spec->provides.end(), api) == spec->provides.end()) {
      raise(Errc::unsatisfied_dependency, lib + " does not provide " + api);
    }
  }

  auto pick = [&](const std::string& api) -> std::string {
    if (auto it = g.provider_of.find(api); it != g.provider_of.end()) return it->second;
    std::string chosen;
    if (auto it = choices.find(api); it != choices.end()) {
      chosen = it->second;
      if (disabled(chosen)) raise(Errc::unsatisfied_dependency, chosen + " is chosen for " + api + " but disabled");
    } else {
      std::vector<std::string> candidates, selected;
      for (const auto& p : registry.providers(api)) {
        if (disabled(p)) continue;
        candidates.push_back(p);
        if (enabled(p)) selected.push_back(p);
      }
      if (selected.size() == 1) {
        chosen = selected.front();
      } else if (selected.size() > 1) {
        raise(Errc::ambiguous_provider, api + ": " + join(selected, ", "));
      } else if (candidates.size() == 1) {
        chosen = candidates.front();
      } else if (candidates.empty()) {
        raise(Errc::unsatisfied_dependency, "no enabled provider for " + api);
      } else {
        raise(Errc::ambiguous_provider, api + ": " + join(candidates, ", "));
      }
    }
    g.provider_of[api] = chosen;
    return chosen;
  };

  enum class Mark { none, active, done };
  std::map<std::string, Mark> mark;
  std::vector<std::string> path;
  std::set<Edge> edges;

  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    Mark& m = mark[name];
    if (m == Mark::done) return;
    if (m == Mark::active) {
      auto it = std::find(path.begin(), path.end(), name);
      std::vector<std::string> cycle(it, path.end());
      cycle.push_back(name);
      raise(Errc::dependency_cycle, join(cycle, " -> "));
    }
    m = Mark::active;
    path.push_back(name);
    const LibrarySpec* spec = registry.find(name);
    for (const std::string& r : spec->depends) {
      std::string target;
      if (registry.is_api(r)) {
        if (std::find(spec->provides.begin(), spec->provides.end(), r) != spec->provides.end()) continue;
        target = pick(r);
      } else {
        target = r;
        if (disabled(target)) {
          raise(Errc::unsatisfied_dependency, name + " requires " + target + ", which is disabled");
        }
      }
      edges.insert({name, target});
      visit(target);
    }
    path.pop_back();
    mark[name] = Mark::done;
  };

  for (const auto& [lib, on] : selections.libraries) {
    if (!on) continue;
    if (registry.find(lib) == nullptr) raise(Errc::unsatisfied_dependency, "unknown library " + lib);
    visit(lib);
  }

  for (const auto& [name, m] : mark) g.nodes.push_back(name);
  g.edges.assign(edges.begin(), edges.end());

  // One provider per API across the whole image.
  std::map<std::string, std::vector<std::string>> provided;
  for (const auto& n : g.nodes) {
    for (const auto& api : registry.find(n)->provides) provided[api].push_back(n);
  }
  for (const auto& [api, libs] : provided) {
    if (libs.size() > 1) raise(Errc::ambiguous_provider, api + ": " + join(libs, ", "));
    g.provider_of[api] = libs.front();
    g.apis.push_back(api);
  }

  for (const auto& n : g.nodes) {
    const LibrarySpec* spec = registry.find(n);
    const auto over = selections.options.find(n);
    for (const auto& o : spec->options) {
      std::string v = o.default_value;
      if (over != selections.options.end()) {
        if (auto it = over->second.find(o.key); it != over->second.end()) v = it->second;
      }
      g.config[n + "." + o.key] = v;
    }
  }
  return g;
}

std::string emit_dot(const ResolvedGraph& graph) {
  std::string out = "digraph unikernel {\n";
  for (const auto& n : graph.nodes) out += "  \"" + n + "\";\n";
  for (const auto& e : graph.edges) out += "  \"" + e.from + "\" -> \"" + e.to + "\";\n";
  out += "}\n";
  return out;
}

namespace {

nlohmann::json plan_body(const BuildPlan& p) {
  nlohmann::json j;
  j["components"] = p.components;
  j["features"] = p.features;
  return j;
}

}  // namespace

BuildPlan emit_build_plan(const ResolvedGraph& graph) {
  BuildPlan plan;
  // Kahn's algorithm, smallest ready name first.
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& n : graph.nodes) pending[n] = 0;
  for (const auto& e : graph.edges) {
    ++pending[e.from];
    dependents[e.to].push_back(e.from);
  }
  std::set<std::string> ready;
  for (const auto& [n, c] : pending) {
    if (c == 0) ready.insert(n);
  }
  while (!ready.empty()) {
    const std::string n = *ready.begin();
    ready.erase(ready.begin());
    plan.components.push_back(n);
    for (const auto& d : dependents[n]) {
      if (--pending[d] == 0) ready.insert(d);
    }
  }

  for (const auto& api : graph.apis) plan.features["HAVE_" + upper(api)] = "1";
  for (const auto& n : graph.nodes) plan.features["CONFIG_" + upper(n)] = "y";
  for (const auto& [key, value] : graph.config) {
    const auto dot = key.find('.');
    plan.features["CONFIG_" + upper(key.substr(0, dot)) + "_" + upper(key.substr(dot + 1))] = value;
  }

  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(plan_body(plan).dump())));
  plan.hash = buf;
  return plan;
}

std::string BuildPlan::to_json() const {
  nlohmann::json j = plan_body(*this);
  j["hash"] = hash;
  return j.dump(2) + "\n";
}

std::string BuildPlan::feature_header() const {
  auto numeric = [](const std::string& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  std::string out = "#pragma once\n// Generated from build plan " + hash + "; do not edit.\n\n";
  for (const auto& [k, v] : features) {
    std::string rendered;
    if (v == "y") {
      rendered = "1";
    } else if (v == "n") {
      rendered = "0";
    } else if (numeric(v)) {
      rendered = v;
    } else {
      rendered = nlohmann::json(v).dump();
    }
    out += "#define " + k + " " + rendered + "\n";
  }
  out += "#define UK_BUILD_PLAN_HASH \"" + hash + "\"\n";
  return out;
}

ProviderChoices parse_provider_choices(const std::vector<std::string>& pairs) {
  ProviderChoices out;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == p.size()) {
      raise(Errc::invalid_argument, "expected api=lib, got '" + p + "'");
    }
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

}  // namespace uk::compose
