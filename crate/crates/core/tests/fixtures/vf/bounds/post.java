package io.demo.codec;

class FrameDecoder {
    public byte read(byte[] buf, int i) {
        log.debug("read at " + i);
        if (i < 0 || i >= buf.length) {
            throw new IndexOutOfBoundsException(i);
        }
        return buf[i];
    }
}
