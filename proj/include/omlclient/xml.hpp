#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Minimal XML document model for the platform's flat wire documents:
// elements, text content, entity escapes. No attributes, namespaces or CDATA;
// the wire format uses none of them.
namespace oml::xml {

class XmlError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Node {
  std::string name;
  std::string text;  // concatenated character data of leaf elements
  std::vector<Node> children;

  Node() = default;
  explicit Node(std::string name, std::string text = {})
      : name(std::move(name)), text(std::move(text)) {}

  Node& add(std::string child_name, std::string child_text = {});
  const Node* find(std::string_view child_name) const;
  std::vector<const Node*> find_all(std::string_view child_name) const;
  // Text of a direct child, or `fallback` when the child is absent.
  std::string child_text(std::string_view child_name,
                         const std::string& fallback = {}) const;
};

Node parse(std::string_view text);
std::string serialize(const Node& root);

std::string escape(std::string_view raw);

}  // namespace oml::xml
