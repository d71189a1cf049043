package io.demo.util;

class Strings {
    public static boolean isEmpty(String s) {
        return s == null || s.length() == 0;
    }
}
