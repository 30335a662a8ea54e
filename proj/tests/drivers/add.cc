#include <cstddef>
#include <cstdint>
#include <cstring>

extern "C" int64_t add(int64_t arg1, int64_t arg2);

extern "C" int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size)
{
    int64_t v[2] = {0, 0};
    std::memcpy(v, data, size < sizeof(v) ? size : sizeof(v));
    add(v[0], v[1]);
    return 0;
}
