#pragma once

// Porter stemmer, the 1980 algorithm: all five step groups, longest-match
// rule selection inside each step, measure/vowel/double-consonant/cvc
// conditions on the stem. Later Porter2/"snowball" revisions (bli->ble,
// the logi rule) are deliberately not applied.

#include <string>

namespace radannot::text {

namespace detail {

class PorterStemmer {
public:
    explicit PorterStemmer(const std::string& word) : b_(word), k_(int(word.size()) - 1) {}

    std::string run() {
        if (b_.size() <= 2) return b_; // too short to have a suffix
        step1ab();
        step1c();
        step2();
        step3();
        step4();
        step5();
        return b_.substr(0, std::size_t(k_ + 1));
    }

private:
    std::string b_;
    int k_;      // index of last letter of current word
    int j_ = 0;  // index of last letter of candidate stem

    bool cons(int i) const {
        char c = b_[std::size_t(i)];
        switch (c) {
            case 'a': case 'e': case 'i': case 'o': case 'u':
                return false;
            case 'y':
                return i == 0 ? true : !cons(i - 1);
            default:
                return true;
        }
    }

    // number of VC sequences in b_[0..j_]
    int measure() const {
        int n = 0;
        int i = 0;
        for (;;) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        for (;;) {
            for (;;) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            for (;;) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j_; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_cons(int i) const {
        if (i < 1) return false;
        if (b_[std::size_t(i)] != b_[std::size_t(i - 1)]) return false;
        return cons(i);
    }

    // consonant-vowel-consonant ending at i, last consonant not w, x or y
    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        char c = b_[std::size_t(i)];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(const char* s) {
        int len = int(std::char_traits<char>::length(s));
        if (len > k_ + 1) return false;
        if (b_.compare(std::size_t(k_ + 1 - len), std::size_t(len), s) != 0) return false;
        j_ = k_ - len;
        return true;
    }

    void set_to(const char* s) {
        int len = int(std::char_traits<char>::length(s));
        b_.replace(std::size_t(j_ + 1), std::size_t(k_ - j_), s);
        k_ = j_ + len;
    }

    void replace_if_measure(const char* s) {
        if (measure() > 0) set_to(s);
    }

    void step1ab() {
        if (b_[std::size_t(k_)] == 's') {
            if (ends("sses"))
                k_ -= 2;
            else if (ends("ies"))
                set_to("i");
            else if (b_[std::size_t(k_ - 1)] != 's')
                --k_;
        }
        if (ends("eed")) {
            if (measure() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            if (ends("at"))
                set_to("ate");
            else if (ends("bl"))
                set_to("ble");
            else if (ends("iz"))
                set_to("ize");
            else if (double_cons(k_)) {
                --k_;
                char c = b_[std::size_t(k_)];
                if (c == 'l' || c == 's' || c == 'z') ++k_;
            } else if (measure() == 1 && cvc(k_)) {
                set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[std::size_t(k_)] = 'i';
    }

    void step2() {
        if (k_ < 1) return;
        switch (b_[std::size_t(k_ - 1)]) {
            case 'a':
                if (ends("ational")) { replace_if_measure("ate"); break; }
                if (ends("tional")) { replace_if_measure("tion"); break; }
                break;
            case 'c':
                if (ends("enci")) { replace_if_measure("ence"); break; }
                if (ends("anci")) { replace_if_measure("ance"); break; }
                break;
            case 'e':
                if (ends("izer")) { replace_if_measure("ize"); break; }
                break;
            case 'l':
                if (ends("abli")) { replace_if_measure("able"); break; }
                if (ends("alli")) { replace_if_measure("al"); break; }
                if (ends("entli")) { replace_if_measure("ent"); break; }
                if (ends("eli")) { replace_if_measure("e"); break; }
                if (ends("ousli")) { replace_if_measure("ous"); break; }
                break;
            case 'o':
                if (ends("ization")) { replace_if_measure("ize"); break; }
                if (ends("ation")) { replace_if_measure("ate"); break; }
                if (ends("ator")) { replace_if_measure("ate"); break; }
                break;
            case 's':
                if (ends("alism")) { replace_if_measure("al"); break; }
                if (ends("iveness")) { replace_if_measure("ive"); break; }
                if (ends("fulness")) { replace_if_measure("ful"); break; }
                if (ends("ousness")) { replace_if_measure("ous"); break; }
                break;
            case 't':
                if (ends("aliti")) { replace_if_measure("al"); break; }
                if (ends("iviti")) { replace_if_measure("ive"); break; }
                if (ends("biliti")) { replace_if_measure("ble"); break; }
                break;
            default:
                break;
        }
    }

    void step3() {
        switch (b_[std::size_t(k_)]) {
            case 'e':
                if (ends("icate")) { replace_if_measure("ic"); break; }
                if (ends("ative")) { replace_if_measure(""); break; }
                if (ends("alize")) { replace_if_measure("al"); break; }
                break;
            case 'i':
                if (ends("iciti")) { replace_if_measure("ic"); break; }
                break;
            case 'l':
                if (ends("ical")) { replace_if_measure("ic"); break; }
                if (ends("ful")) { replace_if_measure(""); break; }
                break;
            case 's':
                if (ends("ness")) { replace_if_measure(""); break; }
                break;
            default:
                break;
        }
    }

    void step4() {
        if (k_ < 1) return;
        switch (b_[std::size_t(k_ - 1)]) {
            case 'a':
                if (ends("al")) break;
                return;
            case 'c':
                if (ends("ance")) break;
                if (ends("ence")) break;
                return;
            case 'e':
                if (ends("er")) break;
                return;
            case 'i':
                if (ends("ic")) break;
                return;
            case 'l':
                if (ends("able")) break;
                if (ends("ible")) break;
                return;
            case 'n':
                if (ends("ant")) break;
                if (ends("ement")) break;
                if (ends("ment")) break;
                if (ends("ent")) break;
                return;
            case 'o':
                if (ends("ion") && j_ >= 0 && (b_[std::size_t(j_)] == 's' || b_[std::size_t(j_)] == 't')) break;
                if (ends("ou")) break;
                return;
            case 's':
                if (ends("ism")) break;
                return;
            case 't':
                if (ends("ate")) break;
                if (ends("iti")) break;
                return;
            case 'u':
                if (ends("ous")) break;
                return;
            case 'v':
                if (ends("ive")) break;
                return;
            case 'z':
                if (ends("ize")) break;
                return;
            default:
                return;
        }
        if (measure() > 1) k_ = j_;
    }

    void step5() {
        j_ = k_;
        if (b_[std::size_t(k_)] == 'e') {
            int a = measure();
            if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
        }
        if (b_[std::size_t(k_)] == 'l' && double_cons(k_) && measure() > 1) --k_;
    }
};

} // namespace detail

// Porter (1980) stem of a lowercase word.
inline std::string porter_stem(const std::string& word) {
    return detail::PorterStemmer(word).run();
}

} // namespace radannot::text
