#include "omlclient/xml.hpp"

#include <cctype>
#include <sstream>

namespace oml::xml {

Node& Node::add(std::string child_name, std::string child_text) {
  children.emplace_back(std::move(child_name), std::move(child_text));
  return children.back();
}

const Node* Node::find(std::string_view child_name) const {
  for (const Node& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

std::vector<const Node*> Node::find_all(std::string_view child_name) const {
  std::vector<const Node*> out;
  for (const Node& c : children)
    if (c.name == child_name) out.push_back(&c);
  return out;
}

std::string Node::child_text(std::string_view child_name,
                             const std::string& fallback) const {
  const Node* c = find(child_name);
  return c ? c->text : fallback;
}

namespace {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw XmlError("XML error at offset " + std::to_string(pos) + ": " + msg);
  }
  bool at_end() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  bool starts_with(std::string_view s) const {
    return text.substr(pos, s.size()) == s;
  }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos;
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<?")) {
        std::size_t end = text.find("?>", pos);
        if (end == std::string_view::npos) fail("unterminated declaration");
        pos = end + 2;
      } else if (starts_with("<!--")) {
        std::size_t end = text.find("-->", pos);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos = end + 3;
      } else {
        return;
      }
    }
  }

  std::string read_name() {
    std::size_t start = pos;
    while (!at_end()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.' || c == ':') {
        ++pos;
      } else {
        break;
      }
    }
    if (pos == start) fail("expected element name");
    return std::string(text.substr(start, pos - start));
  }

  std::string unescape(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      std::size_t semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity reference");
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (!ent.empty() && ent[0] == '#') {
        long code = std::strtol(std::string(ent.substr(ent[1] == 'x' ? 2 : 1)).c_str(),
                                nullptr, ent[1] == 'x' ? 16 : 10);
        if (code < 0 || code > 0x10FFFF) fail("bad character reference");
        // UTF-8 encode
        unsigned long cp = static_cast<unsigned long>(code);
        if (cp < 0x80) out.push_back(static_cast<char>(cp));
        else if (cp < 0x800) {
          out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
          out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
          out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
          out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
          out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
          out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
          out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
          out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
          out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
      } else {
        fail("unknown entity '&" + std::string(ent) + ";'");
      }
      i = semi;
    }
    return out;
  }

  Node parse_element() {
    if (at_end() || peek() != '<') fail("expected '<'");
    ++pos;
    Node node;
    node.name = read_name();
    skip_ws();
    if (starts_with("/>")) {
      pos += 2;
      return node;
    }
    if (at_end() || peek() != '>') fail("malformed start tag for <" + node.name + ">");
    ++pos;
    std::string raw_text;
    for (;;) {
      if (at_end()) fail("unterminated element <" + node.name + ">");
      if (peek() == '<') {
        if (starts_with("<!--")) {
          std::size_t end = text.find("-->", pos);
          if (end == std::string_view::npos) fail("unterminated comment");
          pos = end + 3;
          continue;
        }
        if (starts_with("</")) {
          pos += 2;
          std::string closing = read_name();
          if (closing != node.name)
            fail("mismatched closing tag </" + closing + "> for <" + node.name + ">");
          skip_ws();
          if (at_end() || peek() != '>') fail("malformed closing tag");
          ++pos;
          break;
        }
        node.children.push_back(parse_element());
      } else {
        raw_text.push_back(peek());
        ++pos;
      }
    }
    if (node.children.empty()) {
      node.text = unescape(raw_text);
    }
    return node;
  }
};

void write_node(std::ostream& os, const Node& node, int indent) {
  for (int i = 0; i < indent; ++i) os << ' ';
  os << '<' << node.name;
  if (node.children.empty() && node.text.empty()) {
    os << "/>\n";
    return;
  }
  os << '>';
  if (node.children.empty()) {
    os << escape(node.text) << "</" << node.name << ">\n";
    return;
  }
  os << '\n';
  for (const Node& c : node.children) write_node(os, c, indent + 2);
  for (int i = 0; i < indent; ++i) os << ' ';
  os << "</" << node.name << ">\n";
}

}  // namespace

std::string escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c); break;
    }
  }
  return out;
}

Node parse(std::string_view text) {
  Parser p{text};
  p.skip_misc();
  if (p.at_end()) throw XmlError("empty document");
  Node root = p.parse_element();
  p.skip_misc();
  if (!p.at_end()) throw XmlError("trailing content after root element");
  return root;
}

std::string serialize(const Node& root) {
  std::ostringstream os;
  write_node(os, root, 0);
  return os.str();
}

}  // namespace oml::xml
