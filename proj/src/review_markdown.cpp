#include <algorithm>
#include <charconv>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "revbench/corpus.hpp"
#include "revbench/error.hpp"
#include "text_util.hpp"

namespace revbench {

namespace {

using detail::iequals;
using detail::istarts_with;
using detail::leading_spaces;
using detail::ltrim;
using detail::trim;

struct Heading {
  int level = 0;
  std::string_view text;
};

std::optional<Heading> heading_of(std::string_view line) {
  if (leading_spaces(line) > 3) return std::nullopt;
  std::string_view s = ltrim(line);
  int level = 0;
  while (level < static_cast<int>(s.size()) && s[level] == '#') ++level;
  if (level == 0 || level > 6) return std::nullopt;
  if (level < static_cast<int>(s.size()) && !detail::is_space(s[level])) return std::nullopt;
  std::string_view text = trim(s.substr(level));
  // Optional closing hashes.
  while (!text.empty() && text.back() == '#') text.remove_suffix(1);
  return Heading{level, trim(text)};
}

bool is_fence(std::string_view line) {
  std::string_view s = ltrim(line);
  return s.starts_with("```") || s.starts_with("~~~");
}

struct ItemHeading {
  int index = 0;
  std::string title;
};

std::optional<ItemHeading> item_heading(const Heading& h) {
  if (h.level != 2 || !istarts_with(h.text, "item")) return std::nullopt;
  std::string_view rest = h.text.substr(4);
  if (rest.empty() || !detail::is_space(rest.front())) return std::nullopt;
  rest = ltrim(rest);
  std::size_t digits = 0;
  while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
  if (digits == 0) return std::nullopt;
  int index = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + digits, index);
  if (ec != std::errc{}) return std::nullopt;
  rest = ltrim(rest.substr(digits));
  if (!rest.empty()) {
    if (rest.front() != ':' && rest.front() != '.' && rest.front() != '-') return std::nullopt;
    rest.remove_prefix(1);
  }
  return ItemHeading{index, std::string(trim(rest))};
}

struct Bullet {
  std::size_t indent = 0;
  std::string_view content;
};

std::optional<Bullet> bullet_of(std::string_view line) {
  const std::size_t indent = leading_spaces(line);
  std::string_view s = ltrim(line);
  if (s.size() < 2) return std::nullopt;
  if ((s[0] == '*' || s[0] == '-' || s[0] == '+') && detail::is_space(s[1])) {
    return Bullet{indent, ltrim(s.substr(2))};
  }
  return std::nullopt;
}

struct Labeled {
  std::optional<std::string> tag;
  std::string_view rest;
};

/// Matches "<label> [digits] [(tag)] : rest", case-insensitively, allowing
/// the label to be wrapped in markdown emphasis.
std::optional<Labeled> match_label(std::string_view content, std::string_view label) {
  std::string_view s = content;
  while (!s.empty() && (s.front() == '*' || s.front() == '_')) s.remove_prefix(1);
  if (!istarts_with(s, label)) return std::nullopt;
  s.remove_prefix(label.size());
  while (!s.empty() && (s.front() == '*' || s.front() == '_')) s.remove_prefix(1);
  s = ltrim(s);
  while (!s.empty() && std::isdigit(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  s = ltrim(s);
  Labeled out;
  if (!s.empty() && s.front() == '(') {
    const auto close = s.find(')');
    if (close == std::string_view::npos) return std::nullopt;
    out.tag = std::string(trim(s.substr(1, close - 1)));
    s.remove_prefix(close + 1);
    s = ltrim(s);
  }
  while (!s.empty() && (s.front() == '*' || s.front() == '_')) s.remove_prefix(1);
  if (s.empty() || s.front() != ':') return std::nullopt;
  s.remove_prefix(1);
  while (!s.empty() && (s.front() == '*' || s.front() == '_')) s.remove_prefix(1);
  out.rest = trim(s);
  return out;
}

/// Accumulates the lines of one multi-line field. Text lines are trimmed;
/// lines inside a fenced block keep their indentation relative to the fence.
class FieldBuffer {
 public:
  void start(std::string_view first) {
    lines_.clear();
    in_fence_ = false;
    fence_indent_ = 0;
    if (!trim(first).empty()) add(first, 0);
  }

  void add(std::string_view line, std::size_t /*unused*/) {
    if (is_fence(line)) {
      if (!in_fence_) fence_indent_ = leading_spaces(line);
      in_fence_ = !in_fence_;
      lines_.emplace_back(trim(line));
      return;
    }
    if (in_fence_) {
      std::size_t drop = 0;
      while (drop < line.size() && drop < fence_indent_ && line[drop] == ' ') ++drop;
      std::string_view kept = line.substr(drop);
      while (!kept.empty() && (kept.back() == ' ' || kept.back() == '\t')) kept.remove_suffix(1);
      lines_.emplace_back(kept);
      return;
    }
    lines_.emplace_back(trim(line));
  }

  bool in_fence() const { return in_fence_; }

  std::string value() const {
    std::size_t first = 0;
    std::size_t last = lines_.size();
    while (first < last && lines_[first].empty()) ++first;
    while (last > first && lines_[last - 1].empty()) --last;
    std::string out;
    for (std::size_t i = first; i < last; ++i) {
      if (i > first) out += '\n';
      out += lines_[i];
    }
    return out;
  }

 private:
  std::vector<std::string> lines_;
  bool in_fence_ = false;
  std::size_t fence_indent_ = 0;
};

struct PendingQuote {
  std::optional<std::string> tag;
  std::string body;
  std::string comment;
  bool has_comment = false;
};

struct PendingItem {
  ItemHeading heading;
  std::size_t line_no = 0;
  bool has_claim = false;
  std::string free_claim;
  std::optional<std::string> main_point;
  std::optional<std::string> criteria;
  std::vector<PendingQuote> quotes;
};

std::optional<EvidenceSource> source_from_tag(std::string_view tag) {
  const std::string t = detail::to_lower(tag);
  if (t.find("code") != std::string::npos) return EvidenceSource::Code;
  if (t.find("supplement") != std::string::npos) return EvidenceSource::Supplementary;
  if (t.find("external") != std::string::npos || t.find("literature") != std::string::npos ||
      t.find("reference") != std::string::npos || t.find("citation") != std::string::npos)
    return EvidenceSource::ExternalReference;
  if (t.find("main") != std::string::npos || t.find("paper") != std::string::npos ||
      t.find("manuscript") != std::string::npos)
    return EvidenceSource::MainText;
  return std::nullopt;
}

/// Whole body is a single fenced block: returns the code without the fences.
std::optional<std::string> unfence(const std::string& body) {
  if (!body.starts_with("```") && !body.starts_with("~~~")) return std::nullopt;
  const auto first_nl = body.find('\n');
  if (first_nl == std::string::npos) return std::nullopt;
  const auto last_nl = body.rfind('\n');
  std::string_view last_line = std::string_view(body).substr(last_nl + 1);
  if (last_nl == first_nl || !is_fence(last_line)) return std::nullopt;
  // Only one block: no further fences in between.
  std::string_view inner = std::string_view(body).substr(first_nl + 1, last_nl - first_nl - 1);
  for (auto line : detail::split_lines(inner)) {
    if (is_fence(line)) return std::nullopt;
  }
  return std::string(inner);
}

/// Last "[n]" marker in a quote.
std::optional<int> citation_marker(std::string_view s) {
  std::optional<int> found;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '[') continue;
    std::size_t j = i + 1;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i + 1 && j < s.size() && s[j] == ']') {
      int n = 0;
      std::from_chars(s.data() + i + 1, s.data() + j, n);
      found = n;
    }
  }
  return found;
}

/// URL of an inline markdown link "[text](url)".
std::optional<std::string> inline_link(std::string_view s) {
  const auto pos = s.find("](http");
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view url = detail::find_url(s.substr(pos + 2));
  if (url.empty()) return std::nullopt;
  return std::string(url);
}

std::vector<CriterionTag> split_criteria(std::string_view text, std::vector<std::string>& notices,
                                         const ItemId& id) {
  std::vector<CriterionTag> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of(";,\n", start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view tag = trim(text.substr(start, end - start));
    if (!tag.empty()) {
      CriterionTag t{std::string(tag), normalize_criterion(tag)};
      if (!t.criterion) {
        notices.push_back(id.str() + ": unknown evaluation criterion '" + t.raw + "' kept verbatim");
      }
      out.push_back(std::move(t));
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

[[noreturn]] void malformed(const ItemId& id, std::size_t line_no, const std::string& what) {
  fail(ErrorCode::MalformedItem, id.str() + " (line " + std::to_string(line_no) + "): " + what);
}

}  // namespace

Review parse_review_markdown(std::string_view text, std::string_view paper_id,
                             std::string_view reviewer_id, ReviewerKind kind) {
  if (!is_valid_utf8(text)) {
    fail(ErrorCode::InvalidEncoding,
         "review " + std::string(reviewer_id) + " of paper " + std::string(paper_id) +
             " is not valid UTF-8");
  }
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  Review review;
  review.paper_id = std::string(paper_id);
  review.reviewer_id = std::string(reviewer_id);
  review.reviewer_kind = kind;

  enum class Mode { Preamble, ItemBody, Claim, Evidence, Citations, Other };
  enum class Field { None, FreeClaim, MainPoint, Criteria, Quote, Comment };

  std::vector<PendingItem> pending;
  Mode mode = Mode::Preamble;
  Field field = Field::None;
  FieldBuffer buffer;
  bool preamble_text = false;
  bool global_fence = false;

  auto flush_field = [&]() {
    if (field == Field::None || pending.empty()) {
      field = Field::None;
      return;
    }
    PendingItem& item = pending.back();
    std::string value = buffer.value();
    switch (field) {
      case Field::FreeClaim:
        if (!item.free_claim.empty() && !value.empty()) item.free_claim += '\n';
        item.free_claim += value;
        break;
      case Field::MainPoint: item.main_point = std::move(value); break;
      case Field::Criteria: item.criteria = std::move(value); break;
      case Field::Quote: item.quotes.back().body = std::move(value); break;
      case Field::Comment:
        item.quotes.back().comment = std::move(value);
        item.quotes.back().has_comment = true;
        break;
      case Field::None: break;
    }
    field = Field::None;
  };

  const auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = lines[ln];
    const std::size_t line_no = ln + 1;

    if (!global_fence) {
      if (auto h = heading_of(line)) {
        if (auto ih = item_heading(*h)) {
          flush_field();
          PendingItem item;
          item.heading = std::move(*ih);
          item.line_no = line_no;
          pending.push_back(std::move(item));
          mode = Mode::ItemBody;
          continue;
        }
        if (h->level >= 2 && iequals(h->text, "citation list")) {
          flush_field();
          mode = Mode::Citations;
          continue;
        }
        if (mode != Mode::Preamble && mode != Mode::Citations && h->level >= 3) {
          if (istarts_with(h->text, "claim")) {
            flush_field();
            pending.back().has_claim = true;
            mode = Mode::Claim;
            continue;
          }
          if (istarts_with(h->text, "evidence")) {
            flush_field();
            mode = Mode::Evidence;
            continue;
          }
        }
        if (h->level <= 2) {
          flush_field();
          mode = Mode::Other;
          review.notices.push_back("line " + std::to_string(line_no) + ": section '" +
                                   std::string(h->text) + "' is not an item and was skipped");
          continue;
        }
      }
    }

    switch (mode) {
      case Mode::Preamble:
        if (!trim(line).empty()) preamble_text = true;
        break;
      case Mode::Other:
        break;
      case Mode::ItemBody:
        // Text between the item heading and its Claim block.
        if (!trim(line).empty()) {
          review.notices.push_back(pending.back().heading.title.empty()
                                       ? "line " + std::to_string(line_no) +
                                             ": text outside Claim/Evidence blocks ignored"
                                       : "line " + std::to_string(line_no) + ": text before Claim block ignored");
        }
        break;
      case Mode::Claim: {
        auto b = global_fence ? std::nullopt : bullet_of(line);
        if (b) {
          if (auto m = match_label(b->content, "main point of criticism")) {
            flush_field();
            field = Field::MainPoint;
            buffer.start(m->rest);
            break;
          }
          if (auto m = match_label(b->content, "evaluation criteria")) {
            flush_field();
            field = Field::Criteria;
            buffer.start(m->rest);
            break;
          }
        }
        if (field == Field::None) {
          if (trim(line).empty()) break;
          field = Field::FreeClaim;
          buffer.start({});
        }
        buffer.add(line, 0);
        break;
      }
      case Mode::Evidence: {
        auto b = global_fence ? std::nullopt : bullet_of(line);
        if (b) {
          if (auto m = match_label(b->content, "quote")) {
            flush_field();
            pending.back().quotes.push_back(PendingQuote{m->tag, {}, {}, false});
            field = Field::Quote;
            buffer.start(m->rest);
            break;
          }
          if (auto m = match_label(b->content, "comment")) {
            flush_field();
            if (pending.back().quotes.empty()) {
              malformed(ItemId{review.paper_id, review.reviewer_id, pending.back().heading.index},
                        line_no, "Comment without a preceding Quote");
            }
            field = Field::Comment;
            buffer.start(m->rest);
            break;
          }
        }
        if (field == Field::None) {
          if (trim(line).empty()) break;
          // Free text in the evidence block of a human review: keep it as a
          // main-text quote.
          pending.back().quotes.push_back(PendingQuote{});
          field = Field::Quote;
          buffer.start({});
        }
        buffer.add(line, 0);
        break;
      }
      case Mode::Citations: {
        std::string_view s = trim(line);
        if (s.empty()) break;
        if (s.front() == '[') {
          const auto close = s.find(']');
          int n = 0;
          if (close != std::string_view::npos &&
              std::from_chars(s.data() + 1, s.data() + close, n).ec == std::errc{} && close > 1) {
            Citation c;
            c.index = n;
            c.text = std::string(trim(s.substr(close + 1)));
            review.citations.push_back(std::move(c));
            break;
          }
        }
        if (!review.citations.empty()) {
          review.citations.back().text += ' ';
          review.citations.back().text += s;
        }
        break;
      }
    }
    if (is_fence(line)) global_fence = !global_fence;
  }
  flush_field();

  if (preamble_text) review.notices.emplace_back("text before the first item was ignored");

  for (auto& c : review.citations) {
    std::string_view url = detail::find_url(c.text);
    if (!url.empty()) c.url = std::string(url);
  }
  auto citation_url = [&](int n) -> std::optional<std::string> {
    for (const auto& c : review.citations) {
      if (c.index == n) return c.url ? c.url : std::optional<std::string>(c.text);
    }
    return std::nullopt;
  };

  // Ordinals must run 1..n in heading order.
  std::set<int> seen;
  int expected = 1;
  for (const auto& p : pending) {
    const int idx = p.heading.index;
    if (seen.count(idx)) {
      fail(ErrorCode::DuplicateIndex, "review " + review.reviewer_id + " of paper " +
                                          review.paper_id + ": item " + std::to_string(idx) +
                                          " appears twice (line " + std::to_string(p.line_no) + ")");
    }
    if (idx != expected) {
      fail(ErrorCode::NonContiguousIndices,
           "review " + review.reviewer_id + " of paper " + review.paper_id + ": expected item " +
               std::to_string(expected) + " but found item " + std::to_string(idx) + " (line " +
               std::to_string(p.line_no) + ")");
    }
    seen.insert(idx);
    ++expected;
  }

  for (auto& p : pending) {
    ReviewItem item;
    item.id = ItemId{review.paper_id, review.reviewer_id, p.heading.index};
    if (!p.has_claim) malformed(item.id, p.line_no, "item has no Claim block");

    std::string claim = p.main_point ? *p.main_point : p.free_claim;
    if (p.main_point && !p.free_claim.empty()) claim = p.free_claim + "\n" + claim;
    item.title = p.heading.title;
    if (item.title.empty()) {
      // Convention for untitled items: first line is the title.
      const auto nl = claim.find('\n');
      if (nl == std::string::npos) {
        item.title = claim;
      } else {
        item.title = std::string(trim(std::string_view(claim).substr(0, nl)));
        claim = std::string(trim(std::string_view(claim).substr(nl + 1)));
      }
      review.notices.push_back(item.id.str() + ": untitled item, first claim line used as title");
    }
    item.main_point = std::move(claim);
    if (trim(item.main_point).empty()) malformed(item.id, p.line_no, "empty main point");

    if (p.criteria) item.criteria = split_criteria(*p.criteria, review.notices, item.id);
    if (kind == ReviewerKind::Ai && item.criteria.empty()) {
      malformed(item.id, p.line_no, "AI review item lists no evaluation criteria");
    }

    for (auto& q : p.quotes) {
      EvidenceQuote e;
      std::optional<EvidenceSource> tagged;
      if (q.tag) {
        tagged = source_from_tag(*q.tag);
        if (!tagged) {
          review.notices.push_back(item.id.str() + ": unknown quote source tag '" + *q.tag + "'");
        }
      }
      if (auto code = unfence(q.body)) {
        e.quote = std::move(*code);
        if (!tagged) tagged = EvidenceSource::Code;
      } else {
        e.quote = q.body;
      }
      if (trim(e.quote).empty()) malformed(item.id, p.line_no, "empty quote");
      e.comment = q.comment;

      const auto marker = citation_marker(e.quote);
      const auto link = inline_link(e.quote);
      if (!tagged) {
        if (q.body.find("```") != std::string::npos) {
          tagged = EvidenceSource::Code;
        } else if (link || (marker && citation_url(*marker))) {
          tagged = EvidenceSource::ExternalReference;
        } else {
          tagged = EvidenceSource::MainText;
        }
      }
      e.source = *tagged;
      if (e.source == EvidenceSource::ExternalReference) {
        if (marker && citation_url(*marker)) {
          e.citation_index = marker;
          e.citation_link = citation_url(*marker);
        } else if (link) {
          e.citation_link = link;
        } else {
          malformed(item.id, p.line_no,
                    "external-reference quote has no resolvable citation link");
        }
      }
      item.evidence.push_back(std::move(e));
    }
    review.items.push_back(std::move(item));
  }
  return review;
}

namespace {

std::string_view tag_of(EvidenceSource s) {
  switch (s) {
    case EvidenceSource::MainText: return "main text";
    case EvidenceSource::Supplementary: return "supplementary";
    case EvidenceSource::Code: return "code";
    case EvidenceSource::ExternalReference: return "external reference";
  }
  return "main text";
}

void append_block(std::string& out, std::string_view first_prefix, const std::string& value,
                  std::string_view indent) {
  const auto lines = detail::split_lines(value);
  out += first_prefix;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0) {
      out += lines[i];
    } else {
      out += '\n';
      if (!lines[i].empty()) {
        out += indent;
        out += lines[i];
      }
    }
  }
  out += '\n';
}

}  // namespace

std::string serialize_review_markdown(const Review& review) {
  std::string out;
  for (std::size_t i = 0; i < review.items.size(); ++i) {
    const ReviewItem& item = review.items[i];
    if (i) out += "\n\n";
    out += "## Item " + std::to_string(item.id.index) + ": " + item.title + "\n\n";
    out += "#### Claim\n";
    append_block(out, "* Main point of criticism: ", item.main_point, "  ");
    if (!item.criteria.empty()) {
      std::vector<std::string> raw;
      for (const auto& c : item.criteria) raw.push_back(c.raw);
      out += "* Evaluation criteria: " + detail::join(raw, "; ") + "\n";
    }
    if (!item.evidence.empty()) {
      out += "\n#### Evidence\n";
      for (const auto& e : item.evidence) {
        const std::string prefix = "* Quote (" + std::string(tag_of(e.source)) + "):";
        if (e.source == EvidenceSource::Code && e.quote.find("```") == std::string::npos) {
          out += prefix + "\n";
          append_block(out, "   ```\n   ", e.quote, "   ");
          out += "   ```\n";
        } else {
          append_block(out, prefix + " ", e.quote, "   ");
        }
        append_block(out, "   * Comment: ", e.comment, "     ");
      }
    }
  }
  if (!review.citations.empty()) {
    out += review.items.empty() ? "" : "\n\n";
    out += "#### Citation List\n";
    for (const auto& c : review.citations) {
      out += "[" + std::to_string(c.index) + "] " + c.text + "\n";
    }
  }
  return out;
}

void enforce_item_cap(const Review& review, std::size_t max_items) {
  if (review.items.size() > max_items) {
    fail(ErrorCode::ItemCapExceeded, "review " + review.reviewer_id + " of paper " +
                                         review.paper_id + " has " +
                                         std::to_string(review.items.size()) +
                                         " items; the cap is " + std::to_string(max_items));
  }
}

}  // namespace revbench
