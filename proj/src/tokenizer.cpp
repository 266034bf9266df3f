#include "bugforge/tokenizer.hpp"

#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "bugforge/errors.hpp"

namespace bugforge {

namespace {

const std::unordered_set<std::string>& keyword_set() {
  static const std::unordered_set<std::string> kw = {
      "abstract",   "assert",       "boolean",  "break",   "byte",   "case",      "catch",
      "char",       "class",        "const",    "continue", "default", "do",       "double",
      "else",       "enum",         "extends",  "final",   "finally", "float",    "for",
      "goto",       "if",           "implements", "import", "instanceof", "int",  "interface",
      "long",       "native",       "new",      "package", "private", "protected", "public",
      "return",     "short",        "static",   "strictfp", "super",  "switch",   "synchronized",
      "this",       "throw",        "throws",   "transient", "try",   "var",      "void",
      "volatile",   "while",
  };
  return kw;
}

const std::unordered_set<std::string>& word_literals() {
  static const std::unordered_set<std::string> lits = {"true", "false", "null"};
  return lits;
}

const std::unordered_set<std::string>& primitive_types() {
  static const std::unordered_set<std::string> types = {
      "int", "long", "short", "byte", "char", "boolean", "float", "double", "var"};
  return types;
}

const std::unordered_set<std::string>& modifier_keywords() {
  static const std::unordered_set<std::string> mods = {"final", "static"};
  return mods;
}

// Operator/punctuation lexemes ordered longest-first for maximal munch.
const std::vector<std::string>& op_lexemes() {
  static const std::vector<std::string> table = {
      ">>>=",
      "<<=", ">>=", ">>>",
      "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=",
      "|=", "^=", "++", "--", "->", "::",
      "+", "-", "*", "/", "%", "&", "|", "^", "<", ">", "=", "!", "~", "?", ":", ";", ",",
      ".", "(", ")", "{", "}", "[", "]", "@",
  };
  return table;
}

const std::unordered_set<std::string>& punctuation_set() {
  static const std::unordered_set<std::string> punct = {"(", ")", "{", "}", "[", "]", ";", ",", "."};
  return punct;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

struct Lexer {
  const std::string& src;
  std::size_t pos = 0;
  int line = 1;
  int col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  bool done() const { return pos >= src.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos + ahead < src.size() ? src[pos + ahead] : '\0';
  }
  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_space_and_comments() {
    while (!done()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (!done() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        const int start_line = line, start_col = col;
        advance();
        advance();
        while (!done() && !(peek() == '*' && peek(1) == '/')) advance();
        if (done()) throw ParseError("unterminated block comment", start_line, start_col);
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  Token next() {
    Token tok;
    tok.line = line;
    tok.col = col;
    const char c = peek();

    if (is_ident_start(c)) {
      std::string text;
      while (!done() && is_ident_char(peek())) {
        text += peek();
        advance();
      }
      tok.text = std::move(text);
      if (word_literals().count(tok.text)) {
        tok.kind = TokenKind::literal;
      } else if (keyword_set().count(tok.text)) {
        tok.kind = TokenKind::keyword;
      } else {
        tok.kind = TokenKind::identifier;
      }
      return tok;
    }

    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string text;
      while (!done()) {
        const char d = peek();
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '_') {
          text += d;
          advance();
          // Exponent sign: 1e-5, 0x1p+3.
          const char last = text.back();
          if ((last == 'e' || last == 'E' || last == 'p' || last == 'P') &&
              (peek() == '+' || peek() == '-') && text.size() > 1 &&
              std::isdigit(static_cast<unsigned char>(text[0]))) {
            text += peek();
            advance();
          }
        } else {
          break;
        }
      }
      tok.text = std::move(text);
      tok.kind = TokenKind::literal;
      return tok;
    }

    if (c == '"' || c == '\'') {
      const char quote = c;
      const int start_line = line, start_col = col;
      std::string text(1, quote);
      advance();
      while (!done() && peek() != quote) {
        if (peek() == '\n') {
          throw ParseError(quote == '"' ? "unterminated string literal" : "unterminated char literal",
                           start_line, start_col);
        }
        if (peek() == '\\') {
          text += peek();
          advance();
          if (done()) break;
        }
        text += peek();
        advance();
      }
      if (done()) {
        throw ParseError(quote == '"' ? "unterminated string literal" : "unterminated char literal",
                         start_line, start_col);
      }
      text += quote;
      advance();
      tok.text = std::move(text);
      tok.kind = TokenKind::literal;
      return tok;
    }

    for (const std::string& lex : op_lexemes()) {
      if (src.compare(pos, lex.size(), lex) == 0) {
        for (std::size_t i = 0; i < lex.size(); ++i) advance();
        tok.text = lex;
        tok.kind = TokenKind::other;  // refined by the classification pass
        return tok;
      }
    }

    throw ParseError(std::string("unsupported character '") + c + "'", line, col);
  }
};

const std::unordered_set<std::string>& binary_alphabet_set() {
  static const std::unordered_set<std::string> ops = {
      "==", "!=", "<", ">", "<=", ">=", "+", "-", "*", "/", "%",
      "&&", "||", "&", "|", "^", "<<", ">>"};
  return ops;
}

// True when `prev` can end an expression, i.e. an operator after it is binary.
bool ends_expression(const Token& prev) {
  if (prev.kind == TokenKind::identifier || prev.kind == TokenKind::literal) return true;
  if (prev.text == ")" || prev.text == "]") return true;
  if (prev.kind == TokenKind::keyword && prev.text == "this") return true;
  return false;
}

void check_balance(const std::vector<Token>& toks) {
  std::vector<const Token*> stack;
  auto opens = [](const std::string& t) { return t == "(" || t == "[" || t == "{"; };
  auto closer_for = [](const std::string& t) -> std::string {
    if (t == "(") return ")";
    if (t == "[") return "]";
    return "}";
  };
  for (const Token& t : toks) {
    if (opens(t.text)) {
      stack.push_back(&t);
    } else if (t.text == ")" || t.text == "]" || t.text == "}") {
      if (stack.empty() || closer_for(stack.back()->text) != t.text) {
        throw ParseError("unbalanced '" + t.text + "'", t.line, t.col);
      }
      stack.pop_back();
    }
  }
  if (!stack.empty()) {
    const Token* t = stack.back();
    throw ParseError("unclosed '" + t->text + "'", t->line, t->col);
  }
}

int matching_close(const std::vector<Token>& toks, int open_idx) {
  const std::string& open = toks[open_idx].text;
  const std::string close = open == "(" ? ")" : (open == "[" ? "]" : "}");
  int depth = 0;
  for (int i = open_idx; i < static_cast<int>(toks.size()); ++i) {
    if (toks[i].text == open) ++depth;
    if (toks[i].text == close && --depth == 0) return i;
  }
  return -1;  // unreachable after check_balance
}

bool is_primitive_type(const Token& t) {
  return t.kind == TokenKind::keyword && primitive_types().count(t.text) > 0;
}

// Signature shape: [modifiers/type tokens] name '(' params ')' [throws ...] ('{' | ';').
// Returns the index of the name token, or -1 when the source is not a definition.
int find_signature_name(const std::vector<Token>& toks) {
  int paren = -1;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].text == "(") {
      paren = static_cast<int>(i);
      break;
    }
  }
  if (paren <= 0) return -1;
  const Token& name = toks[paren - 1];
  if (name.kind != TokenKind::identifier && name.kind != TokenKind::call_name) return -1;
  const int close = matching_close(toks, paren);
  if (close < 0) return -1;
  int after = close + 1;
  if (after < static_cast<int>(toks.size()) && toks[after].kind == TokenKind::keyword &&
      toks[after].text == "throws") {
    while (after < static_cast<int>(toks.size()) && toks[after].text != "{" && toks[after].text != ";") {
      ++after;
    }
  }
  if (after >= static_cast<int>(toks.size())) return -1;
  if (toks[after].text == "{") return paren - 1;
  // Body-less declaration: require at least a return type so plain call
  // statements like `foo(a);` are not mistaken for definitions.
  if (toks[after].text == ";" && paren - 1 >= 1) return paren - 1;
  return -1;
}

void mark_params(std::vector<Token>& toks, int sig_paren) {
  const int close = matching_close(toks, sig_paren);
  int depth = 0;
  int last_ident = -1;
  for (int i = sig_paren; i <= close; ++i) {
    const std::string& t = toks[i].text;
    if (t == "(" || t == "[") {
      ++depth;
      continue;
    }
    if (t == ")" || t == "]") {
      --depth;
      if (depth == 0 && last_ident >= 0) toks[last_ident].role = TokenRole::param_decl;
      continue;
    }
    if (depth == 1 && t == ",") {
      if (last_ident >= 0) toks[last_ident].role = TokenRole::param_decl;
      last_ident = -1;
      continue;
    }
    if (toks[i].kind == TokenKind::identifier) last_ident = i;
  }
}

// True when toks[j] is an identifier sitting where a type name would: at a
// statement boundary or after modifiers, and not behind a member-access dot.
bool is_type_position(const std::vector<Token>& toks, int j) {
  if (toks[j].kind != TokenKind::identifier) return false;
  if (j == 0) return true;
  const Token& prev = toks[j - 1];
  if (prev.text == "." ) return false;
  if (prev.text == ";" || prev.text == "{" || prev.text == "}" || prev.text == "(") return true;
  if (prev.kind == TokenKind::keyword && modifier_keywords().count(prev.text)) return true;
  return false;
}

void mark_declarations_and_uses(std::vector<Token>& toks, int body_start) {
  const int n = static_cast<int>(toks.size());

  // Declarator detection with a small statement machine for `int a = 1, b;`.
  bool decl_active = false;
  int decl_depth = 0;
  int paren_depth = 0;
  for (int i = body_start; i < n; ++i) {
    const std::string& text = toks[i].text;
    if (text == "(") ++paren_depth;
    if (text == ")") {
      --paren_depth;
      if (decl_active && paren_depth < decl_depth) decl_active = false;
    }
    if (text == ";" && decl_active && paren_depth == decl_depth) decl_active = false;

    if (toks[i].kind != TokenKind::identifier || toks[i].role != TokenRole::none) continue;
    if (i + 1 >= n) continue;
    const std::string& next = toks[i + 1].text;

    if (decl_active && paren_depth == decl_depth && i > 0 && toks[i - 1].text == "," &&
        (next == "=" || next == "," || next == ";")) {
      toks[i].role = TokenRole::var_decl;
      continue;
    }

    const bool declarator_next = next == "=" || next == ";" || next == "," || next == ":" || next == ")";
    if (!declarator_next) continue;

    // Walk back over an array suffix: `int [ ] xs` / `Foo [ ] xs`.
    int p = i - 1;
    while (p >= 1 && toks[p].text == "]" && toks[p - 1].text == "[") p -= 2;
    if (p < 0) continue;
    const bool typed = is_primitive_type(toks[p]) || is_type_position(toks, p);
    if (typed) {
      toks[i].role = TokenRole::var_decl;
      decl_active = true;
      decl_depth = paren_depth;
    }
  }

  // Declared names -> earliest declaring token index (params included).
  std::unordered_map<std::string, int> declared_at;
  for (int i = 0; i < n; ++i) {
    if (toks[i].role == TokenRole::param_decl || toks[i].role == TokenRole::var_decl) {
      auto it = declared_at.find(toks[i].text);
      if (it == declared_at.end()) declared_at.emplace(toks[i].text, i);
    }
  }

  for (int i = 0; i < n; ++i) {
    if (toks[i].kind != TokenKind::identifier || toks[i].role != TokenRole::none) continue;
    if (i > 0 && toks[i - 1].text == ".") continue;          // member access
    if (i + 1 < n && toks[i + 1].kind == TokenKind::identifier) continue;  // type position
    auto it = declared_at.find(toks[i].text);
    if (it != declared_at.end() && it->second < i) toks[i].role = TokenRole::var_use;
  }
}

}  // namespace

TokenSequence tokenize(const std::string& source) {
  Lexer lexer(source);
  std::vector<Token> toks;
  while (true) {
    lexer.skip_space_and_comments();
    if (lexer.done()) break;
    toks.push_back(lexer.next());
  }
  check_balance(toks);

  // Operator classification needs left context, so walk left to right.
  for (std::size_t i = 0; i < toks.size(); ++i) {
    Token& t = toks[i];
    if (t.kind != TokenKind::other) continue;  // only raw operator lexemes are left unset
    if (binary_alphabet_set().count(t.text) && i > 0 && ends_expression(toks[i - 1])) {
      t.kind = TokenKind::binary_operator;
    } else if (punctuation_set().count(t.text)) {
      t.kind = TokenKind::punctuation;
    }  // assignment ops, unary uses and the rest stay `other`
  }
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i].kind == TokenKind::identifier && toks[i + 1].text == "(") {
      toks[i].kind = TokenKind::call_name;
    }
  }

  int body_start = 0;
  const int name_idx = find_signature_name(toks);
  if (name_idx >= 0) {
    toks[name_idx].kind = TokenKind::identifier;  // definition, not a call
    toks[name_idx].role = TokenRole::function_name;
    const int sig_paren = name_idx + 1;
    mark_params(toks, sig_paren);
    body_start = matching_close(toks, sig_paren) + 1;
    while (body_start < static_cast<int>(toks.size()) && toks[body_start].text != "{" &&
           toks[body_start].text != ";") {
      ++body_start;
    }
  }
  mark_declarations_and_uses(toks, body_start);

  TokenSequence seq;
  seq.tokens.reserve(toks.size() + 2);
  seq.tokens.push_back(Token{kClsText, TokenKind::other, TokenRole::none, 0, 0});
  for (auto& t : toks) seq.tokens.push_back(std::move(t));
  seq.tokens.push_back(Token{kEosText, TokenKind::other, TokenRole::none, 0, 0});
  return seq;
}

std::string render(const TokenSequence& seq) {
  std::string out;
  for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
    if (!out.empty()) out += ' ';
    out += seq.tokens[i].text;
  }
  return out;
}

std::string to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::binary_operator: return "binary_operator";
    case TokenKind::call_name: return "call_name";
    case TokenKind::keyword: return "keyword";
    case TokenKind::literal: return "literal";
    case TokenKind::punctuation: return "punctuation";
    case TokenKind::other: return "other";
  }
  return "other";
}

std::string to_string(TokenRole role) {
  switch (role) {
    case TokenRole::none: return "none";
    case TokenRole::function_name: return "function_name";
    case TokenRole::param_decl: return "param_decl";
    case TokenRole::var_decl: return "var_decl";
    case TokenRole::var_use: return "var_use";
  }
  return "none";
}

const std::vector<std::string>& operator_punctuation_lexemes() { return op_lexemes(); }

}  // namespace bugforge
