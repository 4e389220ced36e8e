#pragma once

// Function-call grammar for activation specs:
//
//   expr  := name [ '(' [ arg { ',' arg } ] ')' ]
//   arg   := expr | key '=' number
//
//   relu
//   sine(omega0=30)           aliases: sin, w0
//   gaussian(s=3)             aliases: gauss, scale
//   sinc(s=1)
//   raised_cosine(T=1, beta=0.05)      alias: rc
//   cosmo(raised_cosine(T=1), zeta=1)

#include <cstddef>
#include <string>
#include <string_view>

#include "cosmo/activations.hpp"
#include "cosmo/common.hpp"

namespace cosmo {

class ParseError : public InvalidArgument {
public:
    ParseError(std::size_t position, const std::string& message)
        : InvalidArgument("position " + std::to_string(position) + ": " + message), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

ActivationSpec parse_activation(std::string_view text);

}  // namespace cosmo
