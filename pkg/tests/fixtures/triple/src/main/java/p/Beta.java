package p;

public class Beta {
    public int twice(int x) {
        return x * 2;
    }

    public int thrice(int x) {
        return x * 3;
    }
}
