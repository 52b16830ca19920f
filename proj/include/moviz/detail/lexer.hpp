#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "moviz/error.hpp"

namespace moviz::detail {

enum class Tok { End, Int, Float, Ident, Punct, Newline };

struct Token {
  Tok kind = Tok::End;
  std::string_view text;
  std::size_t pos = 0;
};

// Shared tokenizer for the expression grammar and the tasklet language.
// Newlines are only reported when `newlines` is set.
class Lexer {
 public:
  Lexer(std::string_view src, bool newlines = false, bool floats = false)
      : src_(src), newlines_(newlines), floats_(floats) {
    advance();
  }

  const Token& peek() const { return cur_; }

  Token next() {
    Token t = cur_;
    advance();
    return t;
  }

  bool accept(char c) {
    if (cur_.kind == Tok::Punct && cur_.text[0] == c) {
      advance();
      return true;
    }
    return false;
  }

  bool at(char c) const { return cur_.kind == Tok::Punct && cur_.text[0] == c; }

  void expect(char c) {
    if (!accept(c)) {
      throw ParseError(std::string("expected '") + c + "' but found " + describe(cur_), cur_.pos);
    }
  }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::End) return "end of input";
    if (t.kind == Tok::Newline) return "end of line";
    return "'" + std::string(t.text) + "'";
  }

 private:
  void advance() {
    std::size_t i = pos_;
    while (i < src_.size()) {
      char c = src_[i];
      if (c == '\n' && newlines_) break;
      if (!std::isspace(static_cast<unsigned char>(c))) break;
      ++i;
    }
    cur_.pos = i;
    if (i >= src_.size()) {
      cur_ = {Tok::End, {}, i};
      pos_ = i;
      return;
    }
    char c = src_[i];
    std::size_t j = i + 1;
    if (c == '\n') {
      cur_ = {Tok::Newline, src_.substr(i, 1), i};
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      Tok kind = Tok::Int;
      if (floats_ && j < src_.size() && src_[j] == '.') {
        kind = Tok::Float;
        ++j;
        while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      }
      if (floats_ && j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
        if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
          kind = Tok::Float;
          j = k;
          while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
        }
      }
      cur_ = {kind, src_.substr(i, j - i), i};
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) {
        ++j;
      }
      cur_ = {Tok::Ident, src_.substr(i, j - i), i};
    } else if (std::string_view("+-*/%(),=;[]").find(c) != std::string_view::npos) {
      cur_ = {Tok::Punct, src_.substr(i, 1), i};
    } else {
      throw ParseError(std::string("unknown operator '") + c + "'", i);
    }
    pos_ = j;
  }

  std::string_view src_;
  bool newlines_;
  bool floats_;
  std::size_t pos_ = 0;
  Token cur_;
};

}  // namespace moviz::detail
