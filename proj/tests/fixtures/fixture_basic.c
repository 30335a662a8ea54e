#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <string.h>

struct blob {
    char *data;
    size_t len;
};

static int checksum_byte(int acc, uint8_t b)
{
    return (acc * 31) ^ b;
}

static size_t clamp_len(size_t n)
{
    return n > 4096 ? 4096 : n;
}

int add(int a, int b)
{
    return a + b;
}

char *concat(const char *a, const char *b)
{
    size_t la = strlen(a);
    size_t lb = strlen(b);
    char *out = malloc(la + lb + 1);
    if (out == NULL) {
        return NULL;
    }
    memcpy(out, a, la);
    memcpy(out + la, b, lb + 1);
    return out;
}

int parse_buf(const uint8_t *buf, size_t len)
{
    int acc = 0;
    len = clamp_len(len);
    for (size_t i = 0; i < len; i++) {
        acc = checksum_byte(acc, buf[i]);
    }
    return acc;
}

const char *get_version(void)
{
    return "fixture-1.0";
}

static void (*saved_callback)(int);

int reg_callback(void (*cb)(int), int arg)
{
    saved_callback = cb;
    if (cb != NULL) {
        cb(arg);
    }
    return arg;
}

int process_blob(struct blob *b)
{
    int total = 0;
    for (size_t i = 0; i < b->len; i++) {
        total += b->data[i];
    }
    return total;
}
