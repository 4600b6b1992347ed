#include "nmt/vocab.hpp"

#include <algorithm>
#include <set>

namespace nmt::model {

Vocab::Vocab(const std::vector<std::string>& tokens) {
    tokens_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
    std::set<std::string> sorted(tokens.begin(), tokens.end());
    for (const auto& t : tokens_) sorted.erase(t);
    tokens_.insert(tokens_.end(), sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
}

}  // namespace nmt::model
