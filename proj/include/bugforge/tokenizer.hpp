#pragma once

#include <string>
#include <vector>

namespace bugforge {

enum class TokenKind {
  identifier,
  binary_operator,  // one of the mutable operator alphabet, in binary position
  call_name,        // identifier directly followed by '('
  keyword,
  literal,          // numbers, strings, chars, true/false/null
  punctuation,      // brackets, separators
  other,            // assignment/unary operators and anything else
};

enum class TokenRole {
  none,
  function_name,  // the defined function's own name
  param_decl,     // parameter name in the signature
  var_decl,       // local declarator name
  var_use,        // mention of a variable declared earlier in the function
};

struct Token {
  std::string text;
  TokenKind kind = TokenKind::other;
  TokenRole role = TokenRole::none;
  int line = 0;  // 1-based source position; 0 for the sentinels
  int col = 0;
};

// A tokenized function. tokens[0] is always the [CLS] sentinel and
// tokens.back() is [EOS]; real tokens sit at indices 1..size()-2 and every
// index that names a token elsewhere in the pipeline (annotations, gold
// locations, pointer masks) counts the sentinels.
struct TokenSequence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  std::size_t inner_begin() const { return 1; }
  std::size_t inner_end() const { return tokens.size() - 1; }
};

inline constexpr const char* kClsText = "[CLS]";
inline constexpr const char* kEosText = "[EOS]";
inline constexpr const char* kMaskText = "[MASK]";

// Lexes one function of the supported language subset (Java-flavoured:
// signatures, blocks, local declarations, calls, literals; no generics,
// lambdas or nested type declarations). Classifies token kinds, detects the
// signature, and marks declaration/use roles. Throws ParseError with a source
// position for unbalanced brackets, unterminated strings/comments and
// characters outside the subset.
TokenSequence tokenize(const std::string& source);

// Inner token texts joined with single spaces. tokenize(render(seq)) yields
// the same token texts and kinds (positions change, content does not).
std::string render(const TokenSequence& seq);

std::string to_string(TokenKind kind);
std::string to_string(TokenRole role);

// Every operator/punctuation lexeme of the grammar, longest first. These are
// the atomic symbols of the subtokenizer: BPE never splits them.
const std::vector<std::string>& operator_punctuation_lexemes();

}  // namespace bugforge
